//! Fidelity, trace distance and the inequalities relating them.

use crate::error::{Error, Result};
use crate::linalg::{hermitian_trace_norm, matrix_sqrt_psd, svd, CMatrix, DensityMatrix};
use crate::model::{convolve, DensityProfile, TorusModel};

/// Values of `F` below `-FIDELITY_TOL` or above `1 + FIDELITY_TOL` are
/// reported as errors instead of being clamped.
pub const FIDELITY_TOL: f64 = 1e-10;

fn same_dim(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return Err(Error::ShapeMismatch(format!(
            "density matrices of dimension {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    Ok(())
}

/// Squared Uhlmann fidelity `F(ρ, σ) = ‖√ρ √σ‖₁²`, clamped into `[0, 1]`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho, sigma)?;
    fidelity_of_matrices(rho.matrix(), sigma.matrix())
}

pub(crate) fn fidelity_of_matrices(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    let product = matrix_sqrt_psd(rho)?.matmul(&matrix_sqrt_psd(sigma)?);
    let f = svd(&product)?.nuclear_norm().powi(2);
    if !(-FIDELITY_TOL..=1.0 + FIDELITY_TOL).contains(&f) {
        return Err(Error::InvalidDensity(format!(
            "fidelity {f} outside [0, 1]"
        )));
    }
    Ok(f.clamp(0.0, 1.0))
}

/// `‖ρ − σ‖₁` (no factor ½).
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho, sigma)?;
    trace_norm_of_difference(rho.matrix(), sigma.matrix())
}

pub(crate) fn trace_norm_of_difference(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    hermitian_trace_norm(&(a - b))
}

/// `√(1 − F(ρ, σ)) − ½‖ρ − σ‖₁`, nonnegative up to roundoff.
pub fn fvdg_margin(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    let f = fidelity(rho, sigma)?;
    Ok((1.0 - f).sqrt() - 0.5 * trace_distance(rho, sigma)?)
}

/// `F(tr_B ρ, tr_B σ) − F(ρ, σ)` for the partial trace over factor
/// `traced_factor` of a two-factor shape.
pub fn dpi_margin(rho: &DensityMatrix, sigma: &DensityMatrix, traced_factor: usize) -> Result<f64> {
    same_dim(rho, sigma)?;
    if rho.shape() != sigma.shape() || rho.shape().len() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "dpi_margin needs a shared two-factor shape, got {:?} and {:?}",
            rho.shape().factors(),
            sigma.shape().factors()
        )));
    }
    if traced_factor > 1 {
        return Err(Error::BadFactorIndex {
            index: traced_factor,
            factors: 2,
        });
    }
    let keep = [1 - traced_factor];
    let before = fidelity(rho, sigma)?;
    let after = fidelity(&rho.partial_trace(&keep)?, &sigma.partial_trace(&keep)?)?;
    Ok(after - before)
}

/// `‖f‖_p` with counting measure; `p = ∞` gives the maximum.
pub fn lp_norm(values: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    values
        .iter()
        .map(|v| v.abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

/// Discrete Hölder bound for the projected square:
/// `2‖V‖_{2r} ‖ρ‖_s^{1/2} − Λ` with `1/r + 1/s = 1` (`s = ∞` when `r = 1`).
///
/// `Λ` is evaluated as in [`crate::model::lambda_of`].
pub fn holder_margin(model: &TorusModel, rho: &DensityProfile, r: f64) -> Result<f64> {
    if !(r >= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "Hölder exponent r = {r} must be >= 1"
        )));
    }
    let s = if r == 1.0 {
        f64::INFINITY
    } else {
        r / (r - 1.0)
    };
    let bound = 2.0 * lp_norm(model.potential(), 2.0 * r) * lp_norm(rho.values(), s).sqrt();
    Ok(bound - crate::model::lambda_of(model, rho))
}

/// `‖V * ρ‖_∞`, the largest mean-field potential value.
pub fn mean_field_sup(model: &TorusModel, rho: &DensityProfile) -> f64 {
    lp_norm(&convolve(model, rho), f64::INFINITY)
}
