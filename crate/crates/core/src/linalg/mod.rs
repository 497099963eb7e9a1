//! Dense complex linear algebra on tensor-product spaces.

mod density;
mod eigen;
mod functions;
mod matrix;
mod svd;
mod tensor;

pub use density::{DensityMatrix, DENSITY_TOL};
pub use eigen::{herm_eig, HermEigen, HERMITIAN_TOL, JACOBI_MAX_DIM, JACOBI_SWEEP_BUDGET};
pub use functions::{
    covariance_check, hermitian_op_norm, hermitian_trace_norm, matrix_sqrt_psd, schatten_norms,
    unitary_propagator, SchattenNorms, PSD_CLAMP,
};
pub use matrix::CMatrix;
pub use svd::{svd, Svd, EIG_ROUTE_MIN_RATIO};
pub use tensor::{
    apply_on_factors, inner, kron, kron_power, kron_vec, merge_matrix, partial_trace_matrix,
    permutation_operator, permute_slots, reduced_from_pure, split_matrix, vec_norm, Permutation,
    PureState, TensorShape, NORM_TOL, PERMUTATION_DIM_BUDGET,
};

pub type C64 = num_complex::Complex64;
