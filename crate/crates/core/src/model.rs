//! The discretized one-particle model on the ring `Z_L`.
//!
//! Integrals over the torus become sums with counting measure and the
//! essential supremum becomes a maximum over sites. The N-body Hamiltonian is
//!
//! `H_N = Σ_j h_j + (1/(N−1)) Σ_{i<j} V(x_i − x_j)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, DensityMatrix, PureState, C64};

/// Largest `L^N` for which the N-body Hamiltonian is materialized.
pub const NBODY_DIM_BUDGET: usize = 20_000;

/// Largest two-particle lifted dimension `(L·a)²` for the fluctuation operator.
pub const FLUCTUATION_DIM_BUDGET: usize = 1024;

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct TorusModel {
    sites: usize,
    h: CMatrix,
    v: Vec<f64>,
}

impl TorusModel {
    pub fn new(h: CMatrix, v: Vec<f64>) -> Result<Self> {
        let sites = v.len();
        if sites < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 sites, got {sites}"
            )));
        }
        if h.rows() != sites || h.cols() != sites {
            return Err(Error::ShapeMismatch(format!(
                "h is {}x{} but V has {sites} entries",
                h.rows(),
                h.cols()
            )));
        }
        let defect = h.hermiticity_defect();
        if defect > SYMMETRY_TOL {
            return Err(Error::NonHermitianInput { defect });
        }
        if let Some(k) = (0..sites).find(|&k| (v[k] - v[(sites - k) % sites]).abs() > SYMMETRY_TOL)
        {
            return Err(Error::InvalidConfig(format!(
                "potential is not even: V[{k}] = {} but V[{}] = {}",
                v[k],
                (sites - k) % sites,
                v[(sites - k) % sites]
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig(
                "potential has non-finite entries".into(),
            ));
        }
        Ok(Self {
            sites,
            h: h.hermitian_part(),
            v,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn h(&self) -> &CMatrix {
        &self.h
    }

    pub fn potential(&self) -> &[f64] {
        &self.v
    }

    /// `V[(x − y) mod L]`.
    pub fn pair(&self, x: usize, y: usize) -> f64 {
        self.v[(x + self.sites - y % self.sites) % self.sites]
    }

    pub fn with_potential(&self, v: Vec<f64>) -> Result<Self> {
        Self::new(self.h.clone(), v)
    }

    pub fn with_h(&self, h: CMatrix) -> Result<Self> {
        Self::new(h, self.v.clone())
    }
}

/// Periodic discrete Laplacian: 2 on the diagonal, −1 on circular neighbours.
pub fn periodic_laplacian(sites: usize) -> CMatrix {
    let mut h = CMatrix::zeros(sites, sites);
    for x in 0..sites {
        h[(x, x)] += C64::new(2.0, 0.0);
        h[(x, (x + 1) % sites)] -= C64::new(1.0, 0.0);
        h[((x + 1) % sites, x)] -= C64::new(1.0, 0.0);
    }
    h
}

/// Circular distance `min(k, L − k)`.
pub fn ring_distance(k: usize, sites: usize) -> usize {
    let k = k % sites;
    k.min(sites - k)
}

/// `λ cos(2πk/L)`.
pub fn bounded_potential(sites: usize, strength: f64) -> Vec<f64> {
    (0..sites)
        .map(|k| strength * (2.0 * PI * k as f64 / sites as f64).cos())
        .collect()
}

/// `v` on the contact site `k = 0`, zero elsewhere.
pub fn spiky_potential(sites: usize, height: f64) -> Vec<f64> {
    let mut v = vec![0.0; sites];
    v[0] = height;
    v
}

/// `λ / (dist(k) + δ)` with circular distance.
pub fn coulomb_like_potential(sites: usize, strength: f64, regularizer: f64) -> Vec<f64> {
    (0..sites)
        .map(|k| strength / (ring_distance(k, sites) as f64 + regularizer))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityProfile(Vec<f64>);

impl DensityProfile {
    pub fn new(rho: Vec<f64>) -> Result<Self> {
        if rho.iter().any(|&r| !(r >= -1e-12)) {
            return Err(Error::InvalidDensity(format!(
                "negative density entry in {rho:?}"
            )));
        }
        let total: f64 = rho.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidDensity(format!("density sums to {total}")));
        }
        Ok(Self(rho))
    }

    pub fn uniform(sites: usize) -> Self {
        Self(vec![1.0 / sites as f64; sites])
    }

    pub fn delta(sites: usize, at: usize) -> Self {
        let mut rho = vec![0.0; sites];
        rho[at] = 1.0;
        Self(rho)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Σ|ρ_a − ρ_b|.
    pub fn l1_distance(&self, other: &DensityProfile) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// Pointwise average of two profiles.
    pub fn midpoint(&self, other: &DensityProfile) -> DensityProfile {
        DensityProfile(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| 0.5 * (a + b))
                .collect(),
        )
    }
}

/// `ρ(x) = γ(x, x)`.
pub fn density_of(gamma: &DensityMatrix) -> DensityProfile {
    density_of_matrix(gamma.matrix())
}

pub(crate) fn density_of_matrix(gamma: &CMatrix) -> DensityProfile {
    DensityProfile(gamma.diagonal().iter().map(|z| z.re).collect())
}

/// `ρ(x) = Σ_m |Φ(x, m)|²` for a state of shape `(L, a)`.
pub fn density_of_lifted(phi: &PureState) -> Result<DensityProfile> {
    let f = phi.shape().factors();
    if f.len() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "lifted one-particle state needs shape (L, a), got {f:?}"
        )));
    }
    let a = f[1];
    Ok(DensityProfile(
        phi.amplitudes()
            .chunks(a)
            .map(|row| row.iter().map(|z| z.norm_sqr()).sum())
            .collect(),
    ))
}

/// `W[x] = Σ_y V[(x − y) mod L] ρ[y]`.
pub fn convolve(model: &TorusModel, rho: &DensityProfile) -> Vec<f64> {
    let l = model.sites();
    (0..l)
        .map(|x| (0..l).map(|y| model.pair(x, y) * rho.0[y]).sum())
        .collect()
}

/// `h + diag(V * ρ)`.
pub fn build_mean_field_generator(model: &TorusModel, rho: &DensityProfile) -> CMatrix {
    let w = convolve(model, rho);
    let mut g = model.h().clone();
    for (x, wx) in w.iter().enumerate() {
        g[(x, x)] += C64::new(*wx, 0.0);
    }
    g
}

/// Dense N-body Hamiltonian on `(C^L)^{⊗N}`.
pub fn build_hn(model: &TorusModel, n: usize) -> Result<CMatrix> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "N-body Hamiltonian needs N >= 2, got {n}"
        )));
    }
    let l = model.sites();
    let dim = checked_power(l, n, NBODY_DIM_BUDGET)?;
    let coupling = 1.0 / (n as f64 - 1.0);
    let mut strides = vec![1usize; n];
    for j in (0..n - 1).rev() {
        strides[j] = strides[j + 1] * l;
    }
    let mut hn = CMatrix::zeros(dim, dim);
    let mut digits = vec![0usize; n];
    for idx in 0..dim {
        let mut rem = idx;
        for j in (0..n).rev() {
            digits[j] = rem % l;
            rem /= l;
        }
        let mut interaction = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                interaction += model.pair(digits[i], digits[j]);
            }
        }
        hn[(idx, idx)] += C64::new(coupling * interaction, 0.0);
        for j in 0..n {
            let xj = digits[j];
            for xp in 0..l {
                let amp = model.h()[(xp, xj)];
                if amp.re == 0.0 && amp.im == 0.0 {
                    continue;
                }
                let target = idx + xp * strides[j] - xj * strides[j];
                hn[(target, idx)] += amp;
            }
        }
    }
    Ok(hn)
}

/// Diagonal of the two-particle fluctuation operator
/// `D = V(x₁ − x₂) − (V * ρ)(x₁)` on `(C^L ⊗ C^a)^{⊗2}`, flattened as
/// `((x₁, m₁), (x₂, m₂))`.
pub fn fluctuation_diagonal(
    model: &TorusModel,
    rho: &DensityProfile,
    aux_dim: usize,
) -> Result<Vec<f64>> {
    let l = model.sites();
    let one = l * aux_dim;
    checked_power(one, 2, FLUCTUATION_DIM_BUDGET)?;
    let w = convolve(model, rho);
    let mut diag = Vec::with_capacity(one * one);
    for x1 in 0..l {
        for _m1 in 0..aux_dim {
            for x2 in 0..l {
                let value = model.pair(x1, x2) - w[x1];
                diag.extend(std::iter::repeat(value).take(aux_dim));
            }
        }
    }
    Ok(diag)
}

/// Dense form of [`fluctuation_diagonal`].
pub fn build_d(model: &TorusModel, rho: &DensityProfile, aux_dim: usize) -> Result<CMatrix> {
    Ok(CMatrix::from_real_diag(&fluctuation_diagonal(
        model, rho, aux_dim,
    )?))
}

/// Projected square bound `Λ = (max_y Σ_x ρ(x) |V(x − y) − (V*ρ)(x)|²)^{1/2}`.
pub fn lambda_of(model: &TorusModel, rho: &DensityProfile) -> f64 {
    let l = model.sites();
    let w = convolve(model, rho);
    (0..l)
        .map(|y| {
            (0..l)
                .map(|x| {
                    let d = model.pair(x, y) - w[x];
                    rho.0[x] * d * d
                })
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
        .sqrt()
}

pub(crate) fn checked_power(base: usize, exp: usize, budget: usize) -> Result<usize> {
    base.checked_pow(exp as u32)
        .filter(|&d| d <= budget)
        .ok_or(Error::SizeBudgetExceeded {
            dim: base.saturating_pow(exp as u32),
            budget,
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{
        kron, partial_trace_matrix, permutation_operator, Permutation, TensorShape,
    };
    use crate::random::{random_density, random_pure_state, random_spectrum, test_rng};

    fn example_model() -> TorusModel {
        TorusModel::new(periodic_laplacian(4), vec![0.0, 1.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn rejects_odd_potential_and_small_lattice() {
        assert!(TorusModel::new(periodic_laplacian(3), vec![0.0, 1.0, 2.0]).is_err());
        assert!(TorusModel::new(periodic_laplacian(1), vec![0.0]).is_err());
    }

    #[test]
    fn presets_are_even() {
        for l in 2..9 {
            let h = periodic_laplacian(l);
            assert!(TorusModel::new(h.clone(), bounded_potential(l, 1.0)).is_ok());
            assert!(TorusModel::new(h.clone(), spiky_potential(l, 3.0)).is_ok());
            assert!(TorusModel::new(h, coulomb_like_potential(l, 1.0, 0.5)).is_ok());
        }
        assert_eq!(
            periodic_laplacian(2),
            CMatrix::from_real_rows(&[&[2.0, -2.0], &[-2.0, 2.0]])
        );
    }

    #[test]
    fn density_examples() {
        let mut e0 = CMatrix::zeros(4, 4);
        e0[(0, 0)] = C64::new(1.0, 0.0);
        assert_eq!(
            density_of(&DensityMatrix::flat(e0).unwrap()).values(),
            &[1.0, 0.0, 0.0, 0.0]
        );
        let mixed = DensityMatrix::maximally_mixed(TensorShape::single(4));
        assert_eq!(density_of(&mixed).values(), &[0.25; 4]);
        let g = DensityMatrix::flat(random_density(&mut test_rng(1), 4, 2)).unwrap();
        let rho = density_of(&g);
        assert!((rho.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(DensityProfile::new(rho.values().to_vec()).is_ok());
    }

    #[test]
    fn lifted_density_examples() {
        let shape = TensorShape::new(vec![4, 3]).unwrap();
        let xi = [C64::new(0.6, 0.0), C64::new(0.0, 0.8), C64::new(0.0, 0.0)];
        let mut amps = vec![C64::new(0.0, 0.0); 12];
        amps[..3].copy_from_slice(&xi);
        let phi = PureState::new(amps, shape.clone()).unwrap();
        let rho = density_of_lifted(&phi).unwrap();
        assert!((rho.values()[0] - 1.0).abs() < 1e-15);

        let flat = PureState::normalized(vec![C64::new(1.0, 0.0); 12], shape.clone()).unwrap();
        for r in density_of_lifted(&flat).unwrap().values() {
            assert!((r - 0.25).abs() < 1e-15);
        }

        let phi = random_pure_state(&mut test_rng(2), shape.clone());
        let gamma = partial_trace_matrix(&phi.projector(), &shape, &[0]).unwrap();
        let via_trace = density_of_matrix(&gamma);
        let direct = density_of_lifted(&phi).unwrap();
        assert!(via_trace.l1_distance(&direct) < 1e-12);
    }

    #[test]
    fn convolution_examples() {
        let m = TorusModel::new(periodic_laplacian(5), vec![0.3; 5]).unwrap();
        let rho = DensityProfile::new(random_spectrum(&mut test_rng(3), 5)).unwrap();
        for w in convolve(&m, &rho) {
            assert!((w - 0.3).abs() < 1e-15);
        }
        let m =
            TorusModel::new(periodic_laplacian(5), coulomb_like_potential(5, 1.0, 0.5)).unwrap();
        assert_eq!(
            convolve(&m, &DensityProfile::delta(5, 0)),
            m.potential().to_vec()
        );
        for w in convolve(&example_model(), &DensityProfile::uniform(4)) {
            assert!((w - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn hn_free_two_body() {
        let m = TorusModel::new(periodic_laplacian(3), vec![0.0; 3]).unwrap();
        let hn = build_hn(&m, 2).unwrap();
        let id = CMatrix::identity(3);
        let want = &kron(m.h(), &id) + &kron(&id, m.h());
        assert!((&hn - &want).max_abs() < 1e-15);
    }

    #[test]
    fn hn_pure_interaction_by_enumeration() {
        let v = 0.7;
        let m = TorusModel::new(CMatrix::zeros(2, 2), vec![0.0, v]).unwrap();
        let hn = build_hn(&m, 2).unwrap();
        assert_eq!(hn, CMatrix::from_real_diag(&[0.0, v, v, 0.0]));
    }

    #[test]
    fn hn_permutation_invariant() {
        let m =
            TorusModel::new(periodic_laplacian(3), coulomb_like_potential(3, 1.3, 0.5)).unwrap();
        for n in [2, 3, 4] {
            let hn = build_hn(&m, n).unwrap();
            assert_eq!(hn.hermiticity_defect(), 0.0);
            for p in Permutation::all(n) {
                let u = permutation_operator(&p, 3).unwrap();
                let defect = (&u.matmul(&hn).matmul(&u.adjoint()) - &hn).max_abs();
                assert!(defect <= 1e-12);
            }
        }
    }

    #[test]
    fn hn_budget_and_n_checks() {
        let m = TorusModel::new(periodic_laplacian(30), vec![0.0; 30]).unwrap();
        assert!(matches!(
            build_hn(&m, 3),
            Err(Error::SizeBudgetExceeded { .. })
        ));
        assert!(build_hn(&m, 1).is_err());
    }

    #[test]
    fn generator_examples() {
        let zero_v = TorusModel::new(periodic_laplacian(4), vec![0.0; 4]).unwrap();
        let rho = DensityProfile::uniform(4);
        assert_eq!(build_mean_field_generator(&zero_v, &rho), *zero_v.h());
        let m = TorusModel::new(CMatrix::zeros(4, 4), vec![1.0, 0.2, -0.5, 0.2]).unwrap();
        let g = build_mean_field_generator(&m, &DensityProfile::delta(4, 0));
        assert_eq!(g, CMatrix::from_real_diag(m.potential()));
        let rho = DensityProfile::new(random_spectrum(&mut test_rng(4), 4)).unwrap();
        assert_eq!(
            build_mean_field_generator(&example_model(), &rho).hermiticity_defect(),
            0.0
        );
    }

    #[test]
    fn fluctuation_examples() {
        let rho = DensityProfile::uniform(4);
        let zero = TorusModel::new(periodic_laplacian(4), vec![0.0; 4]).unwrap();
        assert!(build_d(&zero, &rho, 2).unwrap().max_abs() == 0.0);
        let constant = TorusModel::new(periodic_laplacian(4), vec![2.5; 4]).unwrap();
        assert!(build_d(&constant, &rho, 1).unwrap().max_abs() < 1e-15);
        let d = fluctuation_diagonal(&example_model(), &rho, 1).unwrap();
        assert_eq!(d.len(), 16);
        assert!(d.iter().all(|&x| (x.abs() - 0.5).abs() < 1e-15));
        assert!(d.iter().any(|&x| x > 0.0) && d.iter().any(|&x| x < 0.0));
    }

    #[test]
    fn lambda_examples() {
        let rho = DensityProfile::uniform(4);
        let constant = TorusModel::new(periodic_laplacian(4), vec![1.7; 4]).unwrap();
        assert!(lambda_of(&constant, &rho) < 1e-15);
        assert!((lambda_of(&example_model(), &rho) - 0.5).abs() < 1e-15);

        // rho = δ₀: Λ² = max_y (V[-y] − V[0])² with V[0] = 0
        let v = coulomb_like_potential(5, 1.0, 0.5);
        let v: Vec<f64> = v.iter().map(|x| x - v[0]).collect();
        let m = TorusModel::new(periodic_laplacian(5), v.clone()).unwrap();
        let want = v.iter().map(|x| x * x).fold(0.0, f64::max).sqrt();
        assert!((lambda_of(&m, &DensityProfile::delta(5, 0)) - want).abs() < 1e-15);
    }

    #[test]
    fn lambda_invariant_under_constant_shift() {
        let mut rng = test_rng(5);
        let m =
            TorusModel::new(periodic_laplacian(6), coulomb_like_potential(6, 2.0, 0.5)).unwrap();
        let shifted = m
            .with_potential(m.potential().iter().map(|x| x + 3.25).collect())
            .unwrap();
        for _ in 0..10 {
            let rho = DensityProfile::new(random_spectrum(&mut rng, 6)).unwrap();
            assert!((lambda_of(&m, &rho) - lambda_of(&shifted, &rho)).abs() < 1e-12);
        }
    }
}
