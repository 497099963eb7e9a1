use super::density::DensityMatrix;
use super::eigen::{herm_eig, HermEigen};
use super::svd::svd;
use super::tensor::{kron, partial_trace_matrix};
use super::{CMatrix, C64};
use crate::error::{Error, Result};

/// Eigenvalues above `-PSD_CLAMP` are treated as roundoff and clamped to 0.
pub const PSD_CLAMP: f64 = 1e-10;

/// Principal square root of a Hermitian PSD matrix.
///
/// Eigenvalues within roundoff of zero map to exactly zero, so rank-deficient
/// inputs keep their kernel.
pub fn matrix_sqrt_psd(a: &CMatrix) -> Result<CMatrix> {
    let eig = herm_eig(a)?;
    sqrt_from_eigen(&eig)
}

pub(crate) fn sqrt_from_eigen(eig: &HermEigen) -> Result<CMatrix> {
    let min = eig.min_value();
    if min < -PSD_CLAMP {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    let scale = eig.max_value().abs().max(min.abs());
    let noise = 8.0 * eig.values.len() as f64 * f64::EPSILON * scale;
    Ok(eig
        .map(|l| C64::new(if l <= noise { 0.0 } else { l.sqrt() }, 0.0))
        .hermitian_part())
}

/// `e^{-i t H}` for Hermitian `H`.
pub fn unitary_propagator(h: &CMatrix, t: f64) -> Result<CMatrix> {
    Ok(herm_eig(h)?.map(|l| C64::from_polar(1.0, -l * t)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchattenNorms {
    pub trace_norm: f64,
    pub op_norm: f64,
    pub hs_norm: f64,
}

pub fn schatten_norms(a: &CMatrix) -> Result<SchattenNorms> {
    let s = svd(a)?;
    Ok(SchattenNorms {
        trace_norm: s.sigma.iter().sum(),
        op_norm: s.sigma.first().copied().unwrap_or(0.0),
        hs_norm: s.sigma.iter().map(|x| x * x).sum::<f64>().sqrt(),
    })
}

/// ‖A‖₁ for Hermitian `A` via its eigenvalues.
pub fn hermitian_trace_norm(a: &CMatrix) -> Result<f64> {
    Ok(herm_eig(&a.hermitian_part())?
        .values
        .iter()
        .map(|l| l.abs())
        .sum())
}

/// ‖A‖_op for Hermitian `A` via its eigenvalues.
pub fn hermitian_op_norm(a: &CMatrix) -> Result<f64> {
    let e = herm_eig(&a.hermitian_part())?;
    Ok(e.min_value().abs().max(e.max_value().abs()))
}

/// `‖tr₂((U⊗1) T (U†⊗1)) − U (tr₂ T) U†‖₁` for `T` on a two-factor shape and
/// `U` on the first factor. Zero up to roundoff for every input.
pub fn covariance_check(u: &CMatrix, t: &DensityMatrix) -> Result<f64> {
    let shape = t.shape();
    if shape.len() != 2 || u.rows() != shape.factors()[0] || !u.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "covariance_check: U is {}x{}, T has shape {:?}",
            u.rows(),
            u.cols(),
            shape.factors()
        )));
    }
    let lifted = kron(u, &CMatrix::identity(shape.factors()[1]));
    let rotated = lifted.matmul(t.matrix()).matmul(&lifted.adjoint());
    let lhs = partial_trace_matrix(&rotated, shape, &[0])?;
    let reduced = partial_trace_matrix(t.matrix(), shape, &[0])?;
    let rhs = u.matmul(&reduced).matmul(&u.adjoint());
    hermitian_trace_norm(&(&lhs - &rhs))
}
