//! Time evolution: exact N-body propagation and the self-consistent
//! midpoint scheme for the (lifted) Hartree equation.

use crate::error::{Error, Result};
use crate::linalg::{
    herm_eig, merge_matrix, reduced_from_pure, split_matrix, unitary_propagator, vec_norm, CMatrix,
    DensityMatrix, PureState, TensorShape, C64,
};
use crate::model::{
    build_mean_field_generator, density_of_lifted, density_of_matrix, lambda_of, DensityProfile,
    TorusModel,
};
use crate::purify::{alpha, auxiliary_factors, k_projection_defect, physical_factors};

pub const MIDPOINT_TOL: f64 = 1e-12;
pub const MIDPOINT_MAX_ITERS: usize = 8;
pub const MIDPOINT_STALL_TOL: f64 = 1e-8;
pub const RECONSTRUCTION_TOL: f64 = 1e-10;

/// Spectral decomposition of a Hamiltonian, reused for every propagation.
#[derive(Clone, Debug)]
pub struct PropagatorCache {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
    pub hamiltonian_dim: usize,
    hamiltonian: CMatrix,
}

impl PropagatorCache {
    pub fn new(h: &CMatrix) -> Result<Self> {
        let eig = herm_eig(h)?;
        let rebuilt = eig.map(|l| C64::new(l, 0.0));
        let scale = eig.min_value().abs().max(eig.max_value().abs()).max(1.0);
        let residual = (&rebuilt - h).max_row_sum();
        if residual > RECONSTRUCTION_TOL * scale {
            return Err(Error::ConvergenceFailure {
                routine: "PropagatorCache::new",
                budget: 0,
            });
        }
        Ok(Self {
            eigenvalues: eig.values,
            eigenvectors: eig.vectors,
            hamiltonian_dim: h.rows(),
            hamiltonian: h.clone(),
        })
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    /// `U e^{−itΛ} C` for coefficients `C = U† M` given column-wise.
    fn evolve_coefficients(&self, coeffs: &CMatrix, t: f64) -> CMatrix {
        let phases: Vec<C64> = self
            .eigenvalues
            .iter()
            .map(|&l| C64::from_polar(1.0, -l * t))
            .collect();
        let mut scaled = coeffs.clone();
        let cols = scaled.cols();
        for (i, row) in scaled.as_mut_slice().chunks_mut(cols).enumerate() {
            row.iter_mut().for_each(|z| *z *= phases[i]);
        }
        self.eigenvectors.matmul(&scaled)
    }

    /// Rows of `psi` indexed by the physical configuration, columns by the
    /// auxiliary one (a single column for an unlifted state).
    fn physical_split(
        &self,
        psi: &PureState,
    ) -> Result<(CMatrix, Option<(Vec<usize>, Vec<usize>)>)> {
        if psi.dim() == self.hamiltonian_dim {
            return Ok((
                CMatrix::from_vec(psi.dim(), 1, psi.amplitudes().to_vec()),
                None,
            ));
        }
        let f = psi.shape().factors();
        if f.len() % 2 == 0 {
            let n = f.len() / 2;
            let phys = physical_factors(n);
            let aux = auxiliary_factors(n);
            let phys_dim: usize = phys.iter().map(|&i| f[i]).product();
            if phys_dim == self.hamiltonian_dim {
                let m = split_matrix(psi.amplitudes(), psi.shape(), &phys, &aux);
                return Ok((m, Some((phys, aux))));
            }
        }
        Err(Error::ShapeMismatch(format!(
            "state of shape {f:?} is incompatible with a Hamiltonian of dimension {}",
            self.hamiltonian_dim
        )))
    }

    /// `⟨Ψ, (H ⊗ 1) Ψ⟩` computed from the stored Hamiltonian.
    pub fn energy(&self, psi: &PureState) -> Result<f64> {
        let (m, _) = self.physical_split(psi)?;
        Ok(m.hs_inner(&self.hamiltonian.matmul(&m)).re)
    }
}

/// `Ψ_t = (U e^{−itΛ} U† ⊗ 1) Ψ₀`, acting only on the physical factors of a
/// lifted state with factors `[L, a, L, a, …]`.
pub fn propagate_nbody(cache: &PropagatorCache, psi0: &PureState, t: f64) -> Result<PureState> {
    let (m, split) = cache.physical_split(psi0)?;
    let coeffs = cache.eigenvectors.adjoint().matmul(&m);
    let out = cache.evolve_coefficients(&coeffs, t);
    let amps = match split {
        None => out.into_vec(),
        Some((phys, aux)) => merge_matrix(&out, psi0.shape(), &phys, &aux),
    };
    Ok(PureState::from_parts_unchecked(amps, psi0.shape().clone()))
}

/// Repeated propagation of one initial state from `t = 0`.
#[derive(Clone, Debug)]
pub struct NBodyEvolution<'a> {
    cache: &'a PropagatorCache,
    coeffs: CMatrix,
    split: Option<(Vec<usize>, Vec<usize>)>,
    shape: TensorShape,
}

impl<'a> NBodyEvolution<'a> {
    pub fn new(cache: &'a PropagatorCache, psi0: &PureState) -> Result<Self> {
        let (m, split) = cache.physical_split(psi0)?;
        Ok(Self {
            cache,
            coeffs: cache.eigenvectors.adjoint().matmul(&m),
            split,
            shape: psi0.shape().clone(),
        })
    }

    pub fn at(&self, t: f64) -> PureState {
        let out = self.cache.evolve_coefficients(&self.coeffs, t);
        let amps = match &self.split {
            None => out.into_vec(),
            Some((phys, aux)) => merge_matrix(&out, &self.shape, phys, aux),
        };
        PureState::from_parts_unchecked(amps, self.shape.clone())
    }
}

/// Uniform grid `0, dt, …, t_final`, sampled every `sample_stride` steps
/// (the final time is always sampled).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t_final: f64,
    pub dt: f64,
    pub sample_stride: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, dt: f64, sample_stride: usize) -> Result<Self> {
        if !(t_final >= 0.0) || !(dt > 0.0) || !t_final.is_finite() || sample_stride == 0 {
            return Err(Error::InvalidConfig(format!(
                "time grid needs t_final >= 0, dt > 0, stride >= 1 (got {t_final}, {dt}, {sample_stride})"
            )));
        }
        let ratio = t_final / dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidConfig(format!(
                "t_final / dt = {ratio} is not an integer"
            )));
        }
        Ok(Self {
            t_final,
            dt,
            sample_stride,
        })
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    pub fn is_sample(&self, step: usize) -> bool {
        step % self.sample_stride == 0 || step == self.steps()
    }
}

fn midpoint_iterate<T>(
    model: &TorusModel,
    rho0: &DensityProfile,
    dt: f64,
    mut advance: impl FnMut(&CMatrix) -> Result<(T, DensityProfile)>,
) -> Result<T> {
    let mut mid = rho0.clone();
    let mut residual = f64::INFINITY;
    let mut last = None;
    for _ in 0..MIDPOINT_MAX_ITERS {
        let u = unitary_propagator(&build_mean_field_generator(model, &mid), dt)?;
        let (next, rho1) = advance(&u)?;
        let new_mid = rho0.midpoint(&rho1);
        residual = new_mid.l1_distance(&mid);
        mid = new_mid;
        last = Some(next);
        if residual <= MIDPOINT_TOL {
            break;
        }
    }
    if residual > MIDPOINT_STALL_TOL {
        return Err(Error::FixedPointStall { residual });
    }
    Ok(last.expect("at least one iteration"))
}

pub(crate) fn hartree_step_matrix(model: &TorusModel, gamma: &CMatrix, dt: f64) -> Result<CMatrix> {
    if gamma.rows() != model.sites() {
        return Err(Error::ShapeMismatch(format!(
            "one-body matrix of dimension {} for {} sites",
            gamma.rows(),
            model.sites()
        )));
    }
    let rho0 = density_of_matrix(gamma);
    midpoint_iterate(model, &rho0, dt, |u| {
        let next = u.matmul(gamma).matmul(&u.adjoint()).hermitian_part();
        let rho = density_of_matrix(&next);
        Ok((next, rho))
    })
}

/// One step of `i∂γ = [h + V*ρ_γ, γ]` by the self-consistent unitary midpoint
/// rule.
pub fn hartree_step(model: &TorusModel, gamma: &DensityMatrix, dt: f64) -> Result<DensityMatrix> {
    let next = hartree_step_matrix(model, gamma.matrix(), dt)?;
    DensityMatrix::new(next, gamma.shape().clone())
}

/// One step of `i∂Φ = ((h + V*ρ_Φ) ⊗ 1) Φ` for `Φ` of shape `(L, a)`.
pub fn lifted_hartree_step(model: &TorusModel, phi: &PureState, dt: f64) -> Result<PureState> {
    let rho0 = density_of_lifted(phi)?;
    if rho0.len() != model.sites() {
        return Err(Error::ShapeMismatch(format!(
            "lifted state with {} sites for a {}-site model",
            rho0.len(),
            model.sites()
        )));
    }
    midpoint_iterate(model, &rho0, dt, |u| {
        let next = phi.apply_on_factors(u, &[0])?;
        let rho = density_of_lifted(&next)?;
        Ok((next, rho))
    })
}

/// Per-step record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub alpha: f64,
    pub lambda: f64,
}

/// Full state at a sampled time.
#[derive(Clone, Debug)]
pub struct Sample {
    pub step: usize,
    pub t: f64,
    pub psi_tilde: PureState,
    pub phi: PureState,
    /// `tr_aux |Φ_t⟩⟨Φ_t|`.
    pub gamma: CMatrix,
    /// Mixed Hartree flow of `γ₀` on the same grid.
    pub gamma_direct: CMatrix,
    pub rho: DensityProfile,
    pub lambda: f64,
    pub alpha: f64,
    /// `(k, Γ_t^{N:k})`.
    pub marginals: Vec<(usize, CMatrix)>,
    /// `(k, 1 − tr(Γ̃_t^{N:k} P^{⊗k}))`.
    pub lifted_defects: Vec<(usize, f64)>,
    pub norm: f64,
    pub energy: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub n: usize,
    pub grid: TimeGrid,
    pub k_values: Vec<usize>,
    pub steps: Vec<StepRecord>,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn alphas(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.alpha).collect()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.lambda).collect()
    }
}

/// Joint evolution of `Ψ̃_t` (exact) and `Φ_t` (midpoint steps), with the
/// counting functional and `Λ_t` recorded every step.
pub fn evolve_trajectory(
    model: &TorusModel,
    n: usize,
    psi0: &PureState,
    phi0: &PureState,
    grid: &TimeGrid,
    k_values: &[usize],
) -> Result<Trajectory> {
    let l = model.sites();
    let pf = phi0.shape().factors();
    if pf.len() != 2 || pf[0] != l {
        return Err(Error::ShapeMismatch(format!(
            "one-body lifted state of shape {pf:?} for L = {l}"
        )));
    }
    let a = pf[1];
    if psi0.shape() != &crate::purify::lifted_shape(l, a, n) {
        return Err(Error::ShapeMismatch(format!(
            "N-body lifted state of shape {:?}, expected [L, a] x {n}",
            psi0.shape().factors()
        )));
    }
    if let Some(&k) = k_values.iter().find(|&&k| k == 0 || k > n) {
        return Err(Error::ShapeMismatch(format!("k = {k} outside 1..={n}")));
    }
    let cache = PropagatorCache::new(&crate::model::build_hn(model, n)?)?;
    let evolution = NBodyEvolution::new(&cache, psi0)?;

    let mut phi = phi0.clone();
    let mut gamma_direct = phi0.reduced(&[0])?;
    let mut steps = Vec::with_capacity(grid.steps() + 1);
    let mut samples = Vec::new();
    for step in 0..=grid.steps() {
        if step > 0 {
            phi = lifted_hartree_step(model, &phi, grid.dt)?;
            gamma_direct = hartree_step_matrix(model, &gamma_direct, grid.dt)?;
        }
        let t = grid.time(step);
        let psi = evolution.at(t);
        let rho = density_of_lifted(&phi)?;
        let lambda = lambda_of(model, &rho);
        let alpha_t = alpha(&psi, &phi, n)?;
        steps.push(StepRecord {
            t,
            alpha: alpha_t,
            lambda,
        });
        if !grid.is_sample(step) {
            continue;
        }
        let mut marginals = Vec::with_capacity(k_values.len());
        let mut lifted_defects = Vec::with_capacity(k_values.len());
        for &k in k_values {
            let keep: Vec<usize> = (0..k).map(|j| 2 * j).collect();
            marginals.push((k, reduced_from_pure(psi.amplitudes(), psi.shape(), &keep)?));
            lifted_defects.push((k, k_projection_defect(&psi, &phi, n, k)?));
        }
        samples.push(Sample {
            step,
            t,
            gamma: phi.reduced(&[0])?,
            gamma_direct: gamma_direct.clone(),
            rho,
            lambda,
            alpha: alpha_t,
            marginals,
            lifted_defects,
            norm: vec_norm(psi.amplitudes()),
            energy: cache.energy(&psi)?,
            psi_tilde: psi,
            phi: phi.clone(),
        });
    }
    Ok(Trajectory {
        n,
        grid: *grid,
        k_values: k_values.to_vec(),
        steps,
        samples,
    })
}
