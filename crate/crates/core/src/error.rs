use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input is not Hermitian (defect {defect:.3e})")]
    NonHermitianInput { defect: f64 },

    #[error("{routine} did not converge within {budget} sweeps")]
    ConvergenceFailure {
        routine: &'static str,
        budget: usize,
    },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("factor index {index} out of range for {factors} factors")]
    BadFactorIndex { index: usize, factors: usize },

    #[error("size budget exceeded: dimension {dim} > {budget}")]
    SizeBudgetExceeded { dim: usize, budget: usize },

    #[error("self-consistent midpoint stalled (density residual {residual:.3e})")]
    FixedPointStall { residual: f64 },

    #[error("N-body state is not permutation invariant (defect {defect:.3e})")]
    NotPermutationInvariant { defect: f64 },

    #[error("kernel completion left a symmetry defect of {defect:.3e}")]
    DegenerateKernelCompletion { defect: f64 },

    #[error(
        "certification failed at t = {t}, k = {k:?}: {inequality} (lhs {lhs:.6e}, rhs {rhs:.6e})"
    )]
    CertificationFailure {
        t: f64,
        k: Option<usize>,
        inequality: String,
        lhs: f64,
        rhs: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
