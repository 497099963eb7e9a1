//! Initial data.

use serde::Serialize;

use crate::dynamics::{hartree_step_matrix, NBodyEvolution, PropagatorCache, TimeGrid};
use crate::error::{Error, Result};
use crate::linalg::{
    kron_power, kron_vec, partial_trace_matrix, reduced_from_pure, CMatrix, DensityMatrix,
    PureState, TensorShape, C64,
};
use crate::metrics::{fidelity_of_matrices, trace_norm_of_difference};
use crate::model::{build_hn, TorusModel};
use crate::purify::symmetrize;
use crate::random::{haar_unitary, random_density, test_rng};

/// `(Γ₀, γ₀)`.
#[derive(Clone, Debug)]
pub struct InitialData {
    pub gamma_n: DensityMatrix,
    pub gamma: DensityMatrix,
}

fn nbody_density(m: CMatrix, l: usize, n: usize) -> Result<DensityMatrix> {
    DensityMatrix::new(m.hermitian_part(), TensorShape::uniform(l, n))
}

/// `Γ₀ = γ₀^{⊗N}` with `γ₀` of the given rank.
pub fn scenario_product(seed: u64, sites: usize, n: usize, rank: usize) -> Result<InitialData> {
    if rank == 0 || rank > sites {
        return Err(Error::InvalidConfig(format!(
            "rank {rank} outside 1..={sites}"
        )));
    }
    let mut rng = test_rng(seed);
    let gamma = DensityMatrix::flat(random_density(&mut rng, sites, rank))?;
    let gamma_n = nbody_density(kron_power(gamma.matrix(), n), sites, n)?;
    Ok(InitialData { gamma_n, gamma })
}

/// `Γ₀ = (1 − ε) γ₀^{⊗N} + ε Σ_sym` with `Σ_sym` a symmetrized full-rank
/// random density matrix.
pub fn scenario_near_product(
    seed: u64,
    sites: usize,
    n: usize,
    rank: usize,
    epsilon: f64,
) -> Result<InitialData> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidConfig(format!(
            "epsilon = {epsilon} outside [0, 1]"
        )));
    }
    let base = scenario_product(seed, sites, n, rank)?;
    if epsilon == 0.0 {
        return Ok(base);
    }
    let mut rng = test_rng(seed ^ 0x9e37_79b9_7f4a_7c15);
    let dim = base.gamma_n.dim();
    let noise = symmetrize(&random_density(&mut rng, dim, dim), sites, n);
    let mixed = &base.gamma_n.matrix().scale_real(1.0 - epsilon) + &noise.scale_real(epsilon);
    Ok(InitialData {
        gamma_n: nbody_density(mixed, sites, n)?,
        gamma: base.gamma,
    })
}

/// `Γ₀ = ½|φ^{⊗N}⟩⟨φ^{⊗N}| + ½|ψ^{⊗N}⟩⟨ψ^{⊗N}|` with `φ ⊥ ψ` and
/// `γ₀ = Γ₀^{N:1}`.
#[derive(Clone, Debug)]
pub struct MixtureScenario {
    pub data: InitialData,
    pub phi: Vec<C64>,
    pub psi: Vec<C64>,
}

pub fn scenario_mixture_counterexample(
    seed: u64,
    sites: usize,
    n: usize,
) -> Result<MixtureScenario> {
    if sites < 2 {
        return Err(Error::InvalidConfig(format!(
            "mixture needs L >= 2, got {sites}"
        )));
    }
    let u = haar_unitary(&mut test_rng(seed), sites);
    let phi = u.column(0);
    let psi = u.column(1);
    let power = |v: &[C64]| (1..n).fold(v.to_vec(), |acc, _| kron_vec(&acc, v));
    let (pn, qn) = (power(&phi), power(&psi));
    let gamma_n =
        &CMatrix::outer(&pn, &pn).scale_real(0.5) + &CMatrix::outer(&qn, &qn).scale_real(0.5);
    let gamma =
        &CMatrix::outer(&phi, &phi).scale_real(0.5) + &CMatrix::outer(&psi, &psi).scale_real(0.5);
    Ok(MixtureScenario {
        data: InitialData {
            gamma_n: nbody_density(gamma_n, sites, n)?,
            gamma: DensityMatrix::flat(gamma.hermitian_part())?,
        },
        phi,
        psi,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MixturePoint {
    pub t: f64,
    /// `‖γ_t − ½(φ_t φ_t† + ψ_t ψ_t†)‖₁`: mixed Hartree vs mixture of pure flows.
    pub flow_gap: f64,
    /// `‖Γ_t^{N:1} − γ_t‖₁`.
    pub marginal_vs_mixed: f64,
    /// `‖Γ_t^{N:1} − ½(φ_t φ_t† + ψ_t ψ_t†)‖₁`.
    pub marginal_vs_mixture: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixtureReport {
    /// `1 − F(Γ₀^{N:1}, γ₀)`.
    pub initial_defect: f64,
    pub max_flow_gap: f64,
    pub max_gap_time: f64,
    pub points: Vec<MixturePoint>,
}

/// Evolves the mixture counterexample and compares the mixed Hartree flow
/// with the mixture of the two pure Hartree flows.
pub fn mixture_demo(
    model: &TorusModel,
    n: usize,
    seed: u64,
    grid: &TimeGrid,
) -> Result<MixtureReport> {
    let l = model.sites();
    let scenario = scenario_mixture_counterexample(seed, l, n)?;
    let shape = TensorShape::uniform(l, n);
    let marginal0 = partial_trace_matrix(scenario.data.gamma_n.matrix(), &shape, &[0])?;
    let initial_defect = 1.0 - fidelity_of_matrices(&marginal0, scenario.data.gamma.matrix())?;

    let cache = PropagatorCache::new(&build_hn(model, n)?)?;
    let power = |v: &[C64]| (1..n).fold(v.to_vec(), |acc, _| kron_vec(&acc, v));
    let evo_phi = NBodyEvolution::new(
        &cache,
        &PureState::normalized(power(&scenario.phi), shape.clone())?,
    )?;
    let evo_psi = NBodyEvolution::new(
        &cache,
        &PureState::normalized(power(&scenario.psi), shape.clone())?,
    )?;

    let mut mixed = scenario.data.gamma.matrix().clone();
    let mut pure_phi = CMatrix::outer(&scenario.phi, &scenario.phi);
    let mut pure_psi = CMatrix::outer(&scenario.psi, &scenario.psi);
    let mut points = Vec::new();
    for step in 0..=grid.steps() {
        if step > 0 {
            mixed = hartree_step_matrix(model, &mixed, grid.dt)?;
            pure_phi = hartree_step_matrix(model, &pure_phi, grid.dt)?;
            pure_psi = hartree_step_matrix(model, &pure_psi, grid.dt)?;
        }
        if !grid.is_sample(step) {
            continue;
        }
        let t = grid.time(step);
        let a = evo_phi.at(t);
        let b = evo_psi.at(t);
        let marginal = (&reduced_from_pure(a.amplitudes(), &shape, &[0])?
            + &reduced_from_pure(b.amplitudes(), &shape, &[0])?)
            .scale_real(0.5);
        let mixture = (&pure_phi + &pure_psi).scale_real(0.5);
        points.push(MixturePoint {
            t,
            flow_gap: trace_norm_of_difference(&mixed, &mixture)?,
            marginal_vs_mixed: trace_norm_of_difference(&marginal, &mixed)?,
            marginal_vs_mixture: trace_norm_of_difference(&marginal, &mixture)?,
        });
    }
    let (max_gap_time, max_flow_gap) =
        points
            .iter()
            .map(|p| (p.t, p.flow_gap))
            .fold(
                (0.0, 0.0),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            );
    Ok(MixtureReport {
        initial_defect,
        max_flow_gap,
        max_gap_time,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::fidelity;
    use crate::model::{bounded_potential, periodic_laplacian};
    use crate::purify::permutation_defect;

    #[test]
    fn product_examples() {
        let pure = scenario_product(3, 3, 2, 1).unwrap();
        assert!((pure.gamma.min_eigenvalue()).abs() < 1e-12);
        let full = scenario_product(3, 3, 2, 3).unwrap();
        assert!(full.gamma.min_eigenvalue() > 0.0);
        let again = scenario_product(3, 3, 2, 3).unwrap();
        assert_eq!(full.gamma_n.matrix(), again.gamma_n.matrix());
    }

    #[test]
    fn near_product_examples() {
        let a = scenario_near_product(5, 3, 2, 2, 0.0).unwrap();
        let b = scenario_product(5, 3, 2, 2).unwrap();
        assert_eq!(a.gamma_n.matrix(), b.gamma_n.matrix());
        let c = scenario_near_product(5, 3, 2, 2, 0.1).unwrap();
        assert!(permutation_defect(c.gamma_n.matrix(), 3, 2) < 1e-12);
        let product = c.gamma.tensor_power(2).unwrap();
        assert!(fidelity(&c.gamma_n, &product).unwrap() >= 0.9 - 1e-12);
        let noise = scenario_near_product(5, 3, 2, 2, 1.0).unwrap();
        assert!(fidelity(&noise.gamma_n, &product).unwrap() < 0.9);
    }

    #[test]
    fn mixture_initial_data() {
        let s = scenario_mixture_counterexample(7, 4, 3).unwrap();
        assert!(crate::linalg::inner(&s.phi, &s.psi).norm() < 1e-14);
        let m = s.data.gamma_n.partial_trace(&[0]).unwrap();
        assert!((m.matrix() - s.data.gamma.matrix()).max_abs() < 1e-14);
    }

    #[test]
    fn free_mixture_flows_coincide() {
        let model = TorusModel::new(periodic_laplacian(3), vec![0.0; 3]).unwrap();
        let grid = TimeGrid::new(0.5, 0.01, 10).unwrap();
        let r = mixture_demo(&model, 2, 1, &grid).unwrap();
        assert!(r.initial_defect.abs() < 1e-12);
        assert!(r.max_flow_gap < 1e-12);
    }

    #[test]
    fn interacting_mixture_flows_separate() {
        let model = TorusModel::new(periodic_laplacian(4), bounded_potential(4, 1.0)).unwrap();
        let grid = TimeGrid::new(1.0, 1e-2, 10).unwrap();
        let r = mixture_demo(&model, 3, 1, &grid).unwrap();
        assert!(r.initial_defect.abs() <= 1e-12);
        assert!(r.points[0].flow_gap < 1e-14);
        assert!(r.max_flow_gap > 1e-6, "gap {}", r.max_flow_gap);
    }
}
