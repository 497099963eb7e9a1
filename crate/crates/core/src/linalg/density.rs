use super::eigen::herm_eig;
use super::tensor::{partial_trace_matrix, PureState, TensorShape};
use super::CMatrix;
use crate::error::{Error, Result};

/// Validation tolerance for Hermiticity, positivity and unit trace.
pub const DENSITY_TOL: f64 = 1e-10;

/// Hermitian, positive semidefinite, unit-trace matrix with a tensor shape.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    matrix: CMatrix,
    shape: TensorShape,
    hermiticity_defect: f64,
    min_eigenvalue: f64,
    trace_defect: f64,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix, shape: TensorShape) -> Result<Self> {
        if !matrix.is_square() || matrix.rows() != shape.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix for shape {:?}",
                matrix.rows(),
                matrix.cols(),
                shape.factors()
            )));
        }
        if !matrix.is_finite() {
            return Err(Error::InvalidDensity("non-finite entries".into()));
        }
        let hermiticity_defect = matrix.hermiticity_defect();
        if hermiticity_defect > DENSITY_TOL {
            return Err(Error::InvalidDensity(format!(
                "Hermiticity defect {hermiticity_defect:.3e}"
            )));
        }
        let matrix = matrix.hermitian_part();
        let trace_defect = (matrix.trace().re - 1.0).abs();
        if trace_defect > DENSITY_TOL {
            return Err(Error::InvalidDensity(format!(
                "trace defect {trace_defect:.3e}"
            )));
        }
        let min_eigenvalue = herm_eig(&matrix)?.min_value();
        if min_eigenvalue < -DENSITY_TOL {
            return Err(Error::NotPsd { min_eigenvalue });
        }
        Ok(Self {
            matrix,
            shape,
            hermiticity_defect,
            min_eigenvalue,
            trace_defect,
        })
    }

    /// Single-factor density matrix.
    pub fn flat(matrix: CMatrix) -> Result<Self> {
        let shape = TensorShape::single(matrix.rows().max(1));
        Self::new(matrix, shape)
    }

    pub fn from_pure(state: &PureState) -> Result<Self> {
        Self::new(state.projector(), state.shape().clone())
    }

    pub fn maximally_mixed(shape: TensorShape) -> Self {
        let n = shape.dim();
        Self {
            matrix: CMatrix::identity(n).scale_real(1.0 / n as f64),
            shape,
            hermiticity_defect: 0.0,
            min_eigenvalue: 1.0 / n as f64,
            trace_defect: 0.0,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn shape(&self) -> &TensorShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.hermiticity_defect
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn trace_defect(&self) -> f64 {
        self.trace_defect
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let m = partial_trace_matrix(&self.matrix, &self.shape, keep)?;
        let mut k = keep.to_vec();
        k.sort_unstable();
        DensityMatrix::new(m, self.shape.subshape(&k))
    }

    /// Same matrix, different factorization of the same dimension.
    pub fn reshaped(&self, shape: TensorShape) -> Result<DensityMatrix> {
        if shape.dim() != self.dim() {
            return Err(Error::ShapeMismatch("reshape changes dimension".into()));
        }
        Ok(DensityMatrix {
            shape,
            ..self.clone()
        })
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        DensityMatrix::new(
            super::kron(&self.matrix, &other.matrix),
            self.shape.concat(&other.shape),
        )
    }

    pub fn tensor_power(&self, n: usize) -> Result<DensityMatrix> {
        let mut out = self.clone();
        for _ in 1..n {
            out = out.tensor(self)?;
        }
        Ok(out)
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, u: &CMatrix) -> Result<DensityMatrix> {
        DensityMatrix::new(
            u.matmul(&self.matrix).matmul(&u.adjoint()),
            self.shape.clone(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use crate::random::{random_density, test_rng};

    #[test]
    fn validation_rejects_each_defect() {
        let bad_trace = CMatrix::from_real_diag(&[0.5, 0.4]);
        assert!(matches!(
            DensityMatrix::flat(bad_trace),
            Err(Error::InvalidDensity(_))
        ));
        let negative = CMatrix::from_real_diag(&[1.2, -0.2]);
        assert!(matches!(
            DensityMatrix::flat(negative),
            Err(Error::NotPsd { .. })
        ));
        let mut skew = CMatrix::from_real_diag(&[0.5, 0.5]);
        skew[(0, 1)] = C64::new(0.1, 0.0);
        assert!(matches!(
            DensityMatrix::flat(skew),
            Err(Error::InvalidDensity(_))
        ));
    }

    #[test]
    fn clamps_tiny_roundoff() {
        let m = CMatrix::from_real_diag(&[1.0 + 5e-11, -5e-11]);
        let d = DensityMatrix::flat(m).unwrap();
        assert!(d.min_eigenvalue() < 0.0);
    }

    #[test]
    fn partial_trace_preserves_trace_and_positivity() {
        let mut rng = test_rng(11);
        for _ in 0..20 {
            let rho = random_density(&mut rng, 12, 5);
            let d = DensityMatrix::new(rho, TensorShape::new(vec![3, 2, 2]).unwrap()).unwrap();
            for keep in [vec![0], vec![1, 2], vec![0, 2]] {
                let r = d.partial_trace(&keep).unwrap();
                assert!(r.trace_defect() <= 1e-12);
                assert!(r.min_eigenvalue() >= -1e-10);
            }
        }
    }
}
