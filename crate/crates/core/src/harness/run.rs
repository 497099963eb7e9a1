//! End-to-end pipeline: model, initial data, purification, evolution,
//! certification.

use serde::Serialize;

use super::config::{ExperimentConfig, ScenarioKind};
use super::scenario::{
    scenario_mixture_counterexample, scenario_near_product, scenario_product, InitialData,
};
use crate::bounds::{
    certify_theorems, check_derivative_inequality, check_lemma_d, corrupt_alpha,
    derivative_margins, fidelity_envelope, pickl_envelope, saturate_alpha, theorem_margins,
    trace_envelope, EnvelopeInputs, Inequality, LemmaDReport, MarginReport, LEMMA_D_TOL,
};
use crate::dynamics::{evolve_trajectory, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::hermitian_trace_norm;
use crate::metrics::{fidelity, fidelity_of_matrices, trace_norm_of_difference};
use crate::model::{TorusModel, FLUCTUATION_DIM_BUDGET};
use crate::purify::{
    initial_alpha_bound_check, purify_n_body, PurifiedPair, MARGINAL_TOL, SYMMETRY_TOL,
};

pub const TWO_ROUTE_TOL: f64 = 1e-9;
pub const COUNTING_TOL: f64 = 1e-10;
pub const INITIAL_ALPHA_TOL: f64 = 1e-9;
pub const NORM_DRIFT_TOL: f64 = 1e-11;
pub const ENERGY_DRIFT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KRow {
    pub k: usize,
    pub fidelity_defect: f64,
    pub fidelity_envelope: f64,
    pub trace_distance: f64,
    pub trace_envelope: f64,
    /// `1 − tr(Γ̃^{N:k} P^{⊗k})`.
    pub counting_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub int_lambda: f64,
    pub pickl_envelope: f64,
    pub per_k: Vec<KRow>,
    pub norm: f64,
    pub energy: f64,
    /// `‖tr_aux|Φ_t⟩⟨Φ_t| − γ_t‖₁` against the directly integrated mixed flow.
    pub two_route: f64,
    pub lemma_d: Option<LemmaDReport>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct NegativeControls {
    /// `α̃ × 10` raised a certification failure.
    pub alpha_times_ten_triggered: bool,
    /// `Λ × 0.5` raised a certification failure.
    pub lambda_halved_triggered: bool,
    /// The Gronwall-saturating `α̃` itself certifies.
    pub saturated_passes: bool,
    /// Same two corruptions applied to the Gronwall-saturating `α̃`.
    pub saturated_alpha_times_ten_triggered: bool,
    pub saturated_lambda_halved_triggered: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub passed: bool,
    pub failures: Vec<String>,
    pub warnings: Vec<String>,
    pub sites: usize,
    pub particles: usize,
    pub seed: u64,
    pub alpha0: f64,
    pub fidelity0: f64,
    pub initial_alpha_margin: f64,
    pub overlap_sq: f64,
    pub marginal_defect: f64,
    pub symmetry_defect: f64,
    pub kernel_dim: usize,
    pub min_margin_pickl: f64,
    pub min_margin_fidelity: Vec<(usize, f64)>,
    pub min_margin_trace: Vec<(usize, f64)>,
    pub min_margin_derivative: Option<f64>,
    pub violations: usize,
    pub tolerance_used: f64,
    pub max_cancel_defect: Option<f64>,
    pub min_projected_norm_margin: Option<f64>,
    pub max_two_route: f64,
    pub max_counting_excess: f64,
    pub norm_drift: f64,
    pub energy_drift: f64,
    pub final_int_lambda: f64,
    pub negative_controls: NegativeControls,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub rows: Vec<TrajectoryRow>,
    pub margins: MarginReport,
    pub summary: RunSummary,
}

/// Everything a run computes before it is condensed into a report.
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub model: TorusModel,
    pub data: InitialData,
    pub pair: PurifiedPair,
    pub trajectory: Trajectory,
    pub inputs: EnvelopeInputs,
}

pub fn initial_data(config: &ExperimentConfig) -> Result<InitialData> {
    let (l, n) = (config.sites, config.particles);
    match config.scenario {
        ScenarioKind::Product => scenario_product(config.seed, l, n, config.rank),
        ScenarioKind::NearProduct => {
            scenario_near_product(config.seed, l, n, config.rank, config.epsilon)
        }
        ScenarioKind::Mixture => Ok(scenario_mixture_counterexample(config.seed, l, n)?.data),
    }
}

/// Builds and evolves everything without certifying.
pub fn simulate(config: &ExperimentConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let model = config.model()?;
    let data = initial_data(config)?;
    let pair = purify_n_body(&data.gamma_n, &data.gamma)?;
    let grid = config.grid()?;
    let recorded = evolve_trajectory(
        &model,
        config.particles,
        &pair.psi_tilde,
        &pair.phi,
        &grid,
        &config.k_values,
    )?;
    let fidelity0 = fidelity(&data.gamma_n, &data.gamma.tensor_power(config.particles)?)?;
    let inputs = EnvelopeInputs::new(
        recorded.lambdas(),
        grid.dt,
        recorded.steps[0].alpha,
        config.particles,
        fidelity0,
        config.k_values.clone(),
    )?
    .with_base_slack(config.tol)
    .with_scaled_lambda(config.lambda_scale)?;
    let trajectory = if config.alpha_scale == 1.0 {
        recorded
    } else {
        corrupt_alpha(&recorded, config.alpha_scale)
    };
    Ok(RunArtifacts {
        model,
        data,
        pair,
        trajectory,
        inputs,
    })
}

/// Runs the pipeline and certifies every inequality. Violations are
/// reported in the summary rather than raised.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    let artifacts = simulate(config)?;
    report(config, &artifacts)
}

pub fn report(config: &ExperimentConfig, art: &RunArtifacts) -> Result<RunReport> {
    let traj = &art.trajectory;
    let inputs = &art.inputs;
    let n = config.particles;
    let aux = art.pair.aux_dim;
    let lemma_enabled = config.lemma_d && (config.sites * aux).pow(2) <= FLUCTUATION_DIM_BUDGET;

    let theorem = theorem_margins(traj, inputs)?;
    let derivative = derivative_margins(traj, inputs)?;
    let mut failures = Vec::new();
    let mut warnings = Vec::new();

    let mut rows = Vec::with_capacity(traj.samples.len());
    let mut max_two_route: f64 = 0.0;
    let mut max_counting_excess = f64::NEG_INFINITY;
    let (mut max_cancel, mut min_proj) = (None::<f64>, None::<f64>);
    let (e0, first_norm) = (traj.samples[0].energy, traj.samples[0].norm);
    let (mut norm_drift, mut energy_drift): (f64, f64) = (0.0, 0.0);
    for s in &traj.samples {
        let i = s.step;
        let mut per_k = Vec::with_capacity(s.marginals.len());
        for ((k, marginal), (_, counting)) in s.marginals.iter().zip(&s.lifted_defects) {
            let product = crate::linalg::kron_power(&s.gamma, *k);
            per_k.push(KRow {
                k: *k,
                fidelity_defect: 1.0 - fidelity_of_matrices(marginal, &product)?,
                fidelity_envelope: fidelity_envelope(inputs, *k, i),
                trace_distance: trace_norm_of_difference(marginal, &product)?,
                trace_envelope: trace_envelope(inputs, *k, i),
                counting_defect: *counting,
            });
            max_counting_excess = max_counting_excess.max(counting - *k as f64 * s.alpha);
        }
        let two_route = hermitian_trace_norm(&(&s.gamma - &s.gamma_direct))?;
        max_two_route = max_two_route.max(two_route);
        norm_drift = norm_drift.max((s.norm - first_norm).abs());
        energy_drift = energy_drift.max((s.energy - e0).abs());
        let lemma_d = if lemma_enabled {
            let r = check_lemma_d(&art.model, &s.rho, &s.phi)?;
            max_cancel = Some(max_cancel.map_or(r.cancel_defect, |m| m.max(r.cancel_defect)));
            min_proj =
                Some(min_proj.map_or(r.projected_norm_margin, |m| m.min(r.projected_norm_margin)));
            Some(r)
        } else {
            None
        };
        rows.push(TrajectoryRow {
            t: s.t,
            alpha: s.alpha,
            lambda: s.lambda,
            int_lambda: inputs.integral(i),
            pickl_envelope: pickl_envelope(inputs, i),
            per_k,
            norm: s.norm,
            energy: s.energy,
            two_route,
            lemma_d,
        });
    }
    if !lemma_enabled && config.lemma_d {
        warnings.push(format!(
            "fluctuation check skipped: (L·a)^2 = {} exceeds {FLUCTUATION_DIM_BUDGET}",
            (config.sites * aux).pow(2)
        ));
    }

    for r in theorem.violations().chain(derivative.violations()).take(5) {
        failures.push(format!(
            "{} bound violated at t = {} (k = {:?}): lhs {:.6e} > rhs {:.6e} + slack {:.1e}",
            r.inequality, r.t, r.k, r.lhs, r.rhs, r.slack
        ));
    }
    let initial_alpha_margin =
        initial_alpha_bound_check(&art.pair, &art.data.gamma_n, &art.data.gamma)?;
    let mut require = |ok: bool, msg: String| {
        if !ok {
            failures.push(msg);
        }
    };
    require(
        initial_alpha_margin >= -INITIAL_ALPHA_TOL,
        format!("initial counting bound margin {initial_alpha_margin:.3e}"),
    );
    require(
        art.pair.marginal_defect <= MARGINAL_TOL,
        format!(
            "purification marginal defect {:.3e}",
            art.pair.marginal_defect
        ),
    );
    if let Some(c) = max_cancel {
        require(c <= LEMMA_D_TOL, format!("cancellation defect {c:.3e}"));
    }
    if let Some(p) = min_proj {
        require(
            p >= -LEMMA_D_TOL,
            format!("projected fluctuation bound margin {p:.3e}"),
        );
    }
    require(
        max_two_route <= TWO_ROUTE_TOL,
        format!("two-route one-body defect {max_two_route:.3e}"),
    );
    require(
        max_counting_excess <= COUNTING_TOL,
        format!("k-marginal counting bound exceeded by {max_counting_excess:.3e}"),
    );
    require(
        norm_drift <= NORM_DRIFT_TOL,
        format!("norm drift {norm_drift:.3e}"),
    );
    require(
        energy_drift <= ENERGY_DRIFT_TOL,
        format!("energy drift {energy_drift:.3e}"),
    );
    if config.alpha_scale != 1.0 || config.lambda_scale != 1.0 {
        warnings.push(format!(
            "negative control active: alpha x {}, Lambda x {}",
            config.alpha_scale, config.lambda_scale
        ));
    }
    if art.pair.symmetry_defect > SYMMETRY_TOL {
        warnings.push(format!(
            "kernel completion left symmetry defect {:.3e}",
            art.pair.symmetry_defect
        ));
    }

    let negative_controls = negative_controls(traj, inputs)?;
    let margins = theorem.merge(derivative);
    let per_k = |ineq: Inequality| {
        config
            .k_values
            .iter()
            .map(|&k| {
                (
                    k,
                    margins.min_margin(ineq, Some(k)).unwrap_or(f64::INFINITY),
                )
            })
            .collect::<Vec<_>>()
    };
    let summary = RunSummary {
        name: config.name.clone(),
        passed: failures.is_empty(),
        failures,
        warnings,
        sites: config.sites,
        particles: n,
        seed: config.seed,
        alpha0: inputs.alpha0,
        fidelity0: inputs.fidelity0,
        initial_alpha_margin,
        overlap_sq: art.pair.overlap_sq,
        marginal_defect: art.pair.marginal_defect,
        symmetry_defect: art.pair.symmetry_defect,
        kernel_dim: art.pair.kernel_dim,
        min_margin_pickl: margins
            .min_margin(Inequality::Pickl, None)
            .unwrap_or(f64::INFINITY),
        min_margin_fidelity: per_k(Inequality::Fidelity),
        min_margin_trace: per_k(Inequality::Trace),
        min_margin_derivative: margins.min_margin(Inequality::Derivative, None),
        violations: margins.violations().count(),
        tolerance_used: margins.tolerance_used,
        max_cancel_defect: max_cancel,
        min_projected_norm_margin: min_proj,
        max_two_route,
        max_counting_excess,
        norm_drift,
        energy_drift,
        final_int_lambda: inputs.integral(inputs.lambda_samples.len() - 1),
        negative_controls,
    };
    Ok(RunReport {
        config: config.clone(),
        rows,
        margins,
        summary,
    })
}

fn raises_failure(traj: &Trajectory, inputs: &EnvelopeInputs) -> Result<bool> {
    let outcome =
        certify_theorems(traj, inputs).and_then(|_| check_derivative_inequality(traj, inputs));
    match outcome {
        Ok(_) => Ok(false),
        Err(Error::CertificationFailure { .. }) => Ok(true),
        Err(e) => Err(e),
    }
}

/// Re-certifies with `α̃ × 10` and with `Λ × 0.5`, on the recorded `α̃` and
/// on the Gronwall-saturating `α̃`.
pub fn negative_controls(traj: &Trajectory, inputs: &EnvelopeInputs) -> Result<NegativeControls> {
    let halved = inputs.with_scaled_lambda(0.5)?;
    let saturated = saturate_alpha(traj, inputs)?;
    Ok(NegativeControls {
        alpha_times_ten_triggered: raises_failure(&corrupt_alpha(traj, 10.0), inputs)?,
        lambda_halved_triggered: raises_failure(traj, &halved)?,
        saturated_passes: !raises_failure(&saturated, inputs)?,
        saturated_alpha_times_ten_triggered: raises_failure(
            &corrupt_alpha(&saturated, 10.0),
            inputs,
        )?,
        saturated_lambda_halved_triggered: raises_failure(&saturated, &halved)?,
    })
}
