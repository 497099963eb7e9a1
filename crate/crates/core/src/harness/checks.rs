//! Randomized property suites for the one-shot inequalities.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::bounds::{check_lemma_d, LEMMA_D_TOL};
use crate::error::Result;
use crate::linalg::{covariance_check, DensityMatrix, TensorShape};
use crate::metrics::{dpi_margin, fidelity, fvdg_margin, holder_margin};
use crate::model::{density_of_lifted, periodic_laplacian, DensityProfile, TorusModel};
use crate::purify::{
    alpha, initial_alpha_bound_check, k_projection_defect, purify_n_body, symmetrize,
};
use crate::random::{
    haar_unitary, random_density, random_pure_state, random_spectrum, test_rng, StdRng,
};

pub const LEMMA_SUITE_TOL: f64 = 1e-9;
pub const COVARIANCE_TOL: f64 = 1e-10;
pub const HOLDER_TOL: f64 = 1e-10;

/// Outcome of one randomized suite: `worst` is compared against `threshold`
/// as a lower bound (`lower = true`) or an upper bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub cases: usize,
    pub worst: f64,
    pub threshold: f64,
    pub lower: bool,
}

impl SuiteResult {
    fn lower_bound(name: &str, values: &[f64], threshold: f64) -> Self {
        Self {
            name: name.into(),
            cases: values.len(),
            worst: values.iter().copied().fold(f64::INFINITY, f64::min),
            threshold,
            lower: true,
        }
    }

    fn upper_bound(name: &str, values: &[f64], threshold: f64) -> Self {
        Self {
            name: name.into(),
            cases: values.len(),
            worst: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            threshold,
            lower: false,
        }
    }

    pub fn passed(&self) -> bool {
        if self.lower {
            self.worst >= self.threshold
        } else {
            self.worst <= self.threshold
        }
    }
}

impl std::fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let op = if self.lower { ">=" } else { "<=" };
        write!(
            f,
            "[{}] {:<28} cases={:<4} worst={:+.3e} (required {op} {:.1e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.worst,
            self.threshold
        )
    }
}

fn random_pair(rng: &mut StdRng, dim: usize) -> Result<(DensityMatrix, DensityMatrix)> {
    let r1 = rng.random_range(1..=dim);
    let r2 = rng.random_range(1..=dim);
    Ok((
        DensityMatrix::flat(random_density(rng, dim, r1))?,
        DensityMatrix::flat(random_density(rng, dim, r2))?,
    ))
}

/// `√(1 − F) − ½‖ρ − σ‖₁` on random pairs of dimension 2–9.
pub fn fvdg_suite(seed: u64, cases: usize) -> Result<SuiteResult> {
    let mut rng = test_rng(seed);
    let mut margins = Vec::with_capacity(cases);
    for _ in 0..cases {
        let dim = rng.random_range(2..=9);
        let (a, b) = random_pair(&mut rng, dim)?;
        margins.push(fvdg_margin(&a, &b)?);
    }
    Ok(SuiteResult::lower_bound(
        "fuchs-van de graaf",
        &margins,
        -LEMMA_SUITE_TOL,
    ))
}

/// Fidelity monotonicity under the partial trace on `(3, 3)`.
pub fn dpi_suite(seed: u64, cases: usize) -> Result<SuiteResult> {
    let mut rng = test_rng(seed);
    let shape = TensorShape::new(vec![3, 3])?;
    let mut margins = Vec::with_capacity(cases);
    for i in 0..cases {
        let (a, b) = random_pair(&mut rng, 9)?;
        let a = a.reshaped(shape.clone())?;
        let b = b.reshaped(shape.clone())?;
        margins.push(dpi_margin(&a, &b, i % 2)?);
    }
    Ok(SuiteResult::lower_bound(
        "data processing",
        &margins,
        -LEMMA_SUITE_TOL,
    ))
}

/// `tr₂((U⊗1)T(U†⊗1)) = U(tr₂T)U†` on random `(U, T)`.
pub fn covariance_suite(seed: u64, cases: usize) -> Result<SuiteResult> {
    let mut rng = test_rng(seed);
    let mut defects = Vec::with_capacity(cases);
    for _ in 0..cases {
        let (a, b) = (rng.random_range(2..=4), rng.random_range(1..=4));
        let rank = rng.random_range(1..=a * b);
        let t = DensityMatrix::new(
            random_density(&mut rng, a * b, rank),
            TensorShape::new(vec![a, b])?,
        )?;
        let u = haar_unitary(&mut rng, a);
        defects.push(covariance_check(&u, &t)?);
    }
    Ok(SuiteResult::upper_bound(
        "auxiliary lift covariance",
        &defects,
        COVARIANCE_TOL,
    ))
}

/// Even random potential: `V[k] = V[L − k]`.
pub fn random_even_potential(rng: &mut StdRng, sites: usize) -> Vec<f64> {
    let mut v = vec![0.0; sites];
    for k in 0..=sites / 2 {
        let x: f64 = StandardNormal.sample(rng);
        v[k] = 2.0 * x;
        v[(sites - k) % sites] = v[k];
    }
    v
}

/// Cancellation and projected bound of the fluctuation operator on random
/// `(V, Φ)`. Returns `(cancellation, projected margin)` suites.
pub fn lemma_d_suite(seed: u64, cases: usize) -> Result<(SuiteResult, SuiteResult)> {
    let mut rng = test_rng(seed);
    let mut cancel = Vec::with_capacity(cases);
    let mut margin = Vec::with_capacity(cases);
    for _ in 0..cases {
        let l = rng.random_range(2..=5);
        let a = rng.random_range(1..=3);
        let model = TorusModel::new(periodic_laplacian(l), random_even_potential(&mut rng, l))?;
        let phi = random_pure_state(&mut rng, TensorShape::new(vec![l, a])?);
        let rho = density_of_lifted(&phi)?;
        let r = check_lemma_d(&model, &rho, &phi)?;
        cancel.push(r.cancel_defect);
        margin.push(r.projected_norm_margin);
    }
    Ok((
        SuiteResult::upper_bound("fluctuation cancellation", &cancel, LEMMA_D_TOL),
        SuiteResult::lower_bound("fluctuation projected bound", &margin, -LEMMA_D_TOL),
    ))
}

/// Discrete Hölder bound for `r ∈ {1, 2, 8}` on random `(V, ρ)`.
pub fn holder_suite(seed: u64, cases: usize) -> Result<SuiteResult> {
    let mut rng = test_rng(seed);
    let mut margins = Vec::with_capacity(3 * cases);
    for _ in 0..cases {
        let l = rng.random_range(2..=12);
        let model = TorusModel::new(periodic_laplacian(l), random_even_potential(&mut rng, l))?;
        let rank = rng.random_range(1..=l);
        let mut w = random_spectrum(&mut rng, rank);
        w.resize(l, 0.0);
        for i in (1..l).rev() {
            let j = rng.random_range(0..=i);
            w.swap(i, j);
        }
        let rho = DensityProfile::new(w)?;
        for r in [1.0, 2.0, 8.0] {
            margins.push(holder_margin(&model, &rho, r)?);
        }
    }
    Ok(SuiteResult::lower_bound(
        "discrete hoelder",
        &margins,
        -HOLDER_TOL,
    ))
}

/// Purification contracts on randomly perturbed symmetric inputs.
pub fn purification_suites(seed: u64, cases: usize) -> Result<Vec<SuiteResult>> {
    let mut rng = test_rng(seed);
    let (mut marginal, mut overlap, mut initial, mut symmetry, mut counting) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for i in 0..cases {
        let (l, n) = [(2, 2), (3, 2), (2, 3)][i % 3];
        let rank = rng.random_range(1..=l);
        let gamma = DensityMatrix::flat(random_density(&mut rng, l, rank))?;
        let product = gamma.tensor_power(n)?;
        let dim = product.dim();
        let eps: f64 = rng.random_range(0.0..1.0);
        let noise_rank = rng.random_range(1..=dim);
        let noise = symmetrize(&random_density(&mut rng, dim, noise_rank), l, n);
        let mixed =
            (&product.matrix().scale_real(1.0 - eps) + &noise.scale_real(eps)).hermitian_part();
        let gamma_n = DensityMatrix::new(mixed, TensorShape::uniform(l, n))?;
        let pair = purify_n_body(&gamma_n, &gamma)?;
        marginal.push(pair.marginal_defect);
        overlap.push(pair.overlap_sq - fidelity(&gamma_n, &product)?);
        initial.push(initial_alpha_bound_check(&pair, &gamma_n, &gamma)?);
        symmetry.push(pair.symmetry_defect);
        let a = alpha(&pair.psi_tilde, &pair.phi, n)?;
        for k in 1..=2.min(n) {
            counting.push(k_projection_defect(&pair.psi_tilde, &pair.phi, n, k)? - k as f64 * a);
        }
    }
    Ok(vec![
        SuiteResult::upper_bound("purification marginal", &marginal, 1e-9),
        SuiteResult::lower_bound("purification overlap - F", &overlap, -1e-9),
        SuiteResult::lower_bound("initial counting bound", &initial, -1e-9),
        SuiteResult::upper_bound("purification symmetry", &symmetry, 1e-8),
        SuiteResult::upper_bound("k-marginal counting excess", &counting, 1e-10),
    ])
}

/// Every suite with the sizes used by the `check` subcommand.
pub fn all_suites(seed: u64) -> Result<Vec<SuiteResult>> {
    let (cancel, projected) = lemma_d_suite(seed.wrapping_add(3), 100)?;
    let mut out = vec![
        fvdg_suite(seed, 200)?,
        dpi_suite(seed.wrapping_add(1), 200)?,
        covariance_suite(seed.wrapping_add(2), 50)?,
        cancel,
        projected,
        holder_suite(seed.wrapping_add(4), 100)?,
    ];
    out.extend(purification_suites(seed.wrapping_add(5), 30)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        for s in [
            fvdg_suite(1, 10).unwrap(),
            dpi_suite(2, 10).unwrap(),
            covariance_suite(3, 5).unwrap(),
        ] {
            assert!(s.passed(), "{s}");
        }
        let (c, p) = lemma_d_suite(4, 10).unwrap();
        assert!(c.passed() && p.passed(), "{c}\n{p}");
        assert!(holder_suite(5, 10).unwrap().passed());
        for s in purification_suites(6, 6).unwrap() {
            assert!(s.passed(), "{s}");
        }
    }

    #[test]
    fn even_potential_is_even() {
        let mut rng = test_rng(7);
        for l in 2..8 {
            let v = random_even_potential(&mut rng, l);
            assert!((0..l).all(|k| v[k] == v[(l - k) % l]));
        }
    }
}
