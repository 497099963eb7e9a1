//! Gronwall envelopes and the certifiers built on them.

use std::fmt;

use serde::Serialize;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_op_norm, kron, kron_power, CMatrix, PureState};
use crate::metrics::{fidelity_of_matrices, trace_norm_of_difference};
use crate::model::{build_d, lambda_of, DensityProfile, TorusModel};

/// Absolute part of every certification tolerance.
pub const BASE_SLACK: f64 = 1e-8;

/// Tolerance of the fluctuation-operator contracts.
pub const LEMMA_D_TOL: f64 = 1e-10;

/// Coefficient of `dt` in the derivative-check slack.
pub const DERIVATIVE_SLACK_PER_DT: f64 = 10.0;

#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeInputs {
    pub lambda_samples: Vec<f64>,
    pub dt: f64,
    pub alpha0: f64,
    pub n: usize,
    pub fidelity0: f64,
    pub k_values: Vec<usize>,
    /// Absolute part of the slack, [`BASE_SLACK`] unless overridden.
    pub base_slack: f64,
    integral: Vec<f64>,
}

impl EnvelopeInputs {
    pub fn new(
        lambda_samples: Vec<f64>,
        dt: f64,
        alpha0: f64,
        n: usize,
        fidelity0: f64,
        k_values: Vec<usize>,
    ) -> Result<Self> {
        if lambda_samples.is_empty() || lambda_samples.iter().any(|l| !(l.is_finite() && *l >= 0.0))
        {
            return Err(Error::InvalidConfig(
                "Λ samples must be finite and nonnegative".into(),
            ));
        }
        if !(0.0..=1.0).contains(&alpha0) || !(0.0..=1.0).contains(&fidelity0) {
            return Err(Error::InvalidConfig(format!(
                "alpha0 = {alpha0} and fidelity0 = {fidelity0} must lie in [0, 1]"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidConfig(format!(
                "N = {n}; the estimates need N >= 2"
            )));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidConfig(format!("dt = {dt} must be positive")));
        }
        if let Some(k) = k_values.iter().find(|&&k| k == 0 || k > n) {
            return Err(Error::InvalidConfig(format!("k = {k} outside 1..={n}")));
        }
        let mut integral = Vec::with_capacity(lambda_samples.len());
        let mut acc = 0.0;
        integral.push(0.0);
        for w in lambda_samples.windows(2) {
            acc += 0.5 * dt * (w[0] + w[1]);
            integral.push(acc);
        }
        Ok(Self {
            lambda_samples,
            dt,
            alpha0,
            n,
            fidelity0,
            k_values,
            base_slack: BASE_SLACK,
            integral,
        })
    }

    /// Trapezoid value of `∫₀^{t_i} Λ`.
    pub fn integral(&self, t_index: usize) -> f64 {
        self.integral[t_index]
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_samples.iter().fold(0.0_f64, |m, &l| m.max(l))
    }

    /// Copy with every `Λ` sample multiplied by `factor`.
    pub fn with_scaled_lambda(&self, factor: f64) -> Result<Self> {
        let mut out = Self::new(
            self.lambda_samples.iter().map(|l| l * factor).collect(),
            self.dt,
            self.alpha0,
            self.n,
            self.fidelity0,
            self.k_values.clone(),
        )?;
        out.base_slack = self.base_slack;
        Ok(out)
    }

    pub fn with_base_slack(mut self, base_slack: f64) -> Self {
        self.base_slack = base_slack;
        self
    }

    fn inverse_n(&self) -> f64 {
        1.0 / self.n as f64
    }

    fn initial_defect(&self) -> f64 {
        1.0 - self.fidelity0 + self.inverse_n()
    }

    /// Allowance for the quadrature error of `∫Λ`.
    pub fn slack(&self, rhs: f64) -> f64 {
        self.base_slack + 8.0 * self.lambda_max() * self.dt * rhs
    }
}

/// `exp(8∫Λ) (α̃(0) + 1/N)`.
pub fn pickl_envelope(inputs: &EnvelopeInputs, t_index: usize) -> f64 {
    (8.0 * inputs.integral(t_index)).exp() * (inputs.alpha0 + inputs.inverse_n())
}

/// `2k exp(8∫Λ) (1 − F₀ + 1/N)`.
pub fn fidelity_envelope(inputs: &EnvelopeInputs, k: usize, t_index: usize) -> f64 {
    2.0 * k as f64 * (8.0 * inputs.integral(t_index)).exp() * inputs.initial_defect()
}

/// `2√(2k) exp(4∫Λ) (1 − F₀ + 1/N)^{1/2}`.
pub fn trace_envelope(inputs: &EnvelopeInputs, k: usize, t_index: usize) -> f64 {
    2.0 * (2.0 * k as f64).sqrt()
        * (4.0 * inputs.integral(t_index)).exp()
        * inputs.initial_defect().sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    Fidelity,
    Trace,
    Pickl,
    Derivative,
}

impl Inequality {
    pub fn name(self) -> &'static str {
        match self {
            Inequality::Fidelity => "fidelity",
            Inequality::Trace => "trace",
            Inequality::Pickl => "pickl",
            Inequality::Derivative => "derivative",
        }
    }
}

impl fmt::Display for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MarginRecord {
    pub t: f64,
    pub k: Option<usize>,
    pub inequality: Inequality,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub slack: f64,
}

impl MarginRecord {
    fn new(
        t: f64,
        k: Option<usize>,
        inequality: Inequality,
        lhs: f64,
        rhs: f64,
        slack: f64,
    ) -> Self {
        Self {
            t,
            k,
            inequality,
            lhs,
            rhs,
            margin: rhs - lhs,
            slack,
        }
    }

    pub fn violated(&self) -> bool {
        !(self.margin >= -self.slack)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MarginReport {
    pub records: Vec<MarginRecord>,
    /// Largest slack granted to any record.
    pub tolerance_used: f64,
}

impl MarginReport {
    fn from_records(records: Vec<MarginRecord>) -> Self {
        let tolerance_used = records.iter().fold(0.0_f64, |m, r| m.max(r.slack));
        Self {
            records,
            tolerance_used,
        }
    }

    pub fn merge(mut self, other: MarginReport) -> Self {
        self.tolerance_used = self.tolerance_used.max(other.tolerance_used);
        self.records.extend(other.records);
        self
    }

    pub fn violations(&self) -> impl Iterator<Item = &MarginRecord> {
        self.records.iter().filter(|r| r.violated())
    }

    pub fn first_violation(&self) -> Option<&MarginRecord> {
        self.violations().next()
    }

    pub fn passed(&self) -> bool {
        self.first_violation().is_none()
    }

    /// Smallest margin over records of one inequality (and one `k`, if given).
    pub fn min_margin(&self, inequality: Inequality, k: Option<usize>) -> Option<f64> {
        self.records
            .iter()
            .filter(|r| r.inequality == inequality && (k.is_none() || r.k == k))
            .map(|r| r.margin)
            .reduce(f64::min)
    }

    /// `Err(CertificationFailure)` for the first violated record.
    pub fn into_result(self) -> Result<Self> {
        match self.first_violation() {
            Some(r) => Err(Error::CertificationFailure {
                t: r.t,
                k: r.k,
                inequality: r.inequality.name().to_string(),
                lhs: r.lhs,
                rhs: r.rhs,
            }),
            None => Ok(self),
        }
    }
}

/// Margins of the propagation-of-chaos and counting-functional bounds at
/// every sampled time, without raising on violations.
pub fn theorem_margins(trajectory: &Trajectory, inputs: &EnvelopeInputs) -> Result<MarginReport> {
    if inputs.lambda_samples.len() != trajectory.steps.len() || inputs.n != trajectory.n {
        return Err(Error::ShapeMismatch(format!(
            "envelope inputs ({} Λ samples, N = {}) do not match the trajectory ({} steps, N = {})",
            inputs.lambda_samples.len(),
            inputs.n,
            trajectory.steps.len(),
            trajectory.n
        )));
    }
    let mut records = Vec::new();
    for sample in &trajectory.samples {
        let i = sample.step;
        for &k in &inputs.k_values {
            let marginal = sample
                .marginals
                .iter()
                .find(|(kk, _)| *kk == k)
                .map(|(_, m)| m)
                .ok_or_else(|| {
                    Error::ShapeMismatch(format!("trajectory lacks the k = {k} marginal"))
                })?;
            let product = kron_power(&sample.gamma, k);
            let defect = 1.0 - fidelity_of_matrices(marginal, &product)?;
            let rhs = fidelity_envelope(inputs, k, i);
            records.push(MarginRecord::new(
                sample.t,
                Some(k),
                Inequality::Fidelity,
                defect,
                rhs,
                inputs.slack(rhs),
            ));
            let distance = trace_norm_of_difference(marginal, &product)?;
            let rhs = trace_envelope(inputs, k, i);
            records.push(MarginRecord::new(
                sample.t,
                Some(k),
                Inequality::Trace,
                distance,
                rhs,
                inputs.slack(rhs),
            ));
        }
        let rhs = pickl_envelope(inputs, i);
        records.push(MarginRecord::new(
            sample.t,
            None,
            Inequality::Pickl,
            sample.alpha,
            rhs,
            inputs.slack(rhs),
        ));
    }
    Ok(MarginReport::from_records(records))
}

/// [`theorem_margins`], failing on the first violation.
pub fn certify_theorems(trajectory: &Trajectory, inputs: &EnvelopeInputs) -> Result<MarginReport> {
    theorem_margins(trajectory, inputs)?.into_result()
}

/// Central differences of `α̃` against `8Λ(α̃ + 1/N)` at interior steps, with
/// slack `10·dt`. `Λ` is taken from `inputs`.
pub fn derivative_margins(
    trajectory: &Trajectory,
    inputs: &EnvelopeInputs,
) -> Result<MarginReport> {
    let alphas = trajectory.alphas();
    if inputs.lambda_samples.len() != alphas.len() {
        return Err(Error::ShapeMismatch(
            "Λ samples and α̃ samples differ in length".into(),
        ));
    }
    let dt = inputs.dt;
    let slack = DERIVATIVE_SLACK_PER_DT * dt;
    let records = (1..alphas.len().saturating_sub(1))
        .map(|i| {
            let lhs = ((alphas[i + 1] - alphas[i - 1]) / (2.0 * dt)).abs();
            let rhs = 8.0 * inputs.lambda_samples[i] * (alphas[i] + inputs.inverse_n());
            MarginRecord::new(
                trajectory.steps[i].t,
                None,
                Inequality::Derivative,
                lhs,
                rhs,
                slack,
            )
        })
        .collect();
    Ok(MarginReport::from_records(records))
}

pub fn check_derivative_inequality(
    trajectory: &Trajectory,
    inputs: &EnvelopeInputs,
) -> Result<MarginReport> {
    derivative_margins(trajectory, inputs)?.into_result()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LemmaDReport {
    /// `‖p₂ D p₂‖_op`.
    pub cancel_defect: f64,
    /// `‖D p₁‖_op`.
    pub projected_norm: f64,
    pub lambda: f64,
    /// `Λ − ‖D p₁‖_op`.
    pub projected_norm_margin: f64,
}

impl LemmaDReport {
    pub fn holds(&self) -> bool {
        self.cancel_defect <= LEMMA_D_TOL && self.projected_norm_margin >= -LEMMA_D_TOL
    }
}

/// Builds `D = V(x₁ − x₂) − (V*ρ)(x₁)` on two lifted particles and measures
/// the cancellation `p₂Dp₂ = 0` and the projected bound `‖Dp₁‖ ≤ Λ`.
pub fn check_lemma_d(
    model: &TorusModel,
    rho: &DensityProfile,
    phi: &PureState,
) -> Result<LemmaDReport> {
    let f = phi.shape().factors();
    if f.len() != 2 || f[0] != model.sites() || rho.len() != model.sites() {
        return Err(Error::ShapeMismatch(format!(
            "lifted state of shape {f:?} with {} density values for {} sites",
            rho.len(),
            model.sites()
        )));
    }
    let d = build_d(model, rho, f[1])?;
    let projector = phi.projector();
    let identity = CMatrix::identity(phi.dim());
    let p1 = kron(&projector, &identity);
    let p2 = kron(&identity, &projector);
    let cancel_defect = hermitian_op_norm(&p2.matmul(&d).matmul(&p2))?;
    let dp1 = d.matmul(&p1);
    let squared = dp1.adjoint().matmul(&dp1);
    let projected_norm = hermitian_op_norm(&squared)?.sqrt();
    let lambda = lambda_of(model, rho);
    Ok(LemmaDReport {
        cancel_defect,
        projected_norm,
        lambda,
        projected_norm_margin: lambda - projected_norm,
    })
}

/// Copy of the trajectory with every recorded `α̃` multiplied by `factor`.
pub fn corrupt_alpha(trajectory: &Trajectory, factor: f64) -> Trajectory {
    let mut out = trajectory.clone();
    out.steps.iter_mut().for_each(|s| s.alpha *= factor);
    out.samples.iter_mut().for_each(|s| s.alpha *= factor);
    out
}

/// Copy of the trajectory whose `α̃` saturates the derivative check:
/// `(α̃ᵢ₊₁ − α̃ᵢ₋₁)/(2dt) = 8Λᵢ(α̃ᵢ + 1/N)`, started from
/// `α̃(0)` and `exp(8∫Λ)(α̃(0) + 1/N) − 1/N` at the first step.
pub fn saturate_alpha(trajectory: &Trajectory, inputs: &EnvelopeInputs) -> Result<Trajectory> {
    let steps = trajectory.steps.len();
    if inputs.lambda_samples.len() != steps {
        return Err(Error::ShapeMismatch(
            "Λ samples and α̃ samples differ in length".into(),
        ));
    }
    let inv_n = inputs.inverse_n();
    let mut alpha = vec![inputs.alpha0];
    if steps > 1 {
        alpha.push(pickl_envelope(inputs, 1) - inv_n);
    }
    for i in 1..steps.saturating_sub(1) {
        let next =
            alpha[i - 1] + 2.0 * inputs.dt * 8.0 * inputs.lambda_samples[i] * (alpha[i] + inv_n);
        alpha.push(next);
    }
    let mut out = trajectory.clone();
    out.steps
        .iter_mut()
        .zip(&alpha)
        .for_each(|(s, a)| s.alpha = *a);
    out.samples.iter_mut().for_each(|s| s.alpha = alpha[s.step]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::TensorShape;
    use crate::model::periodic_laplacian;
    use crate::random::{random_pure_state, test_rng};

    fn inputs(lambda: Vec<f64>, alpha0: f64, n: usize, f0: f64) -> EnvelopeInputs {
        EnvelopeInputs::new(lambda, 0.1, alpha0, n, f0, vec![1]).unwrap()
    }

    #[test]
    fn pickl_examples() {
        let zero = inputs(vec![0.0; 11], 0.2, 4, 1.0);
        assert!((0..11).all(|i| pickl_envelope(&zero, i) == 0.45));
        let c = 0.3;
        let constant = inputs(vec![c; 11], 0.1, 2, 1.0);
        for i in 0..11 {
            let t = i as f64 * 0.1;
            assert!((pickl_envelope(&constant, i) - (8.0 * c * t).exp() * 0.6).abs() < 1e-12);
        }
        assert_eq!(pickl_envelope(&inputs(vec![1.0], 0.0, 4, 1.0), 0), 0.25);
    }

    #[test]
    fn fidelity_and_trace_examples() {
        let product = inputs(vec![0.5; 3], 0.0, 4, 1.0);
        assert_eq!(fidelity_envelope(&product, 1, 0), 0.5);
        assert!((trace_envelope(&product, 1, 0) - 2f64.sqrt()).abs() < 1e-15);
        let mixed = EnvelopeInputs::new(vec![0.0; 5], 0.1, 0.0, 3, 0.9, vec![2]).unwrap();
        for i in 0..5 {
            assert!((fidelity_envelope(&mixed, 2, i) - 26.0 / 15.0).abs() < 1e-14);
        }
    }

    #[test]
    fn trace_envelope_squared_is_four_fidelity_envelopes() {
        let inp =
            EnvelopeInputs::new(vec![0.2, 0.7, 0.1, 0.4], 0.05, 0.1, 3, 0.8, vec![1, 2]).unwrap();
        for k in [1, 2, 3] {
            for i in 0..4 {
                let lhs = trace_envelope(&inp, k, i).powi(2);
                assert!((lhs - 4.0 * fidelity_envelope(&inp, k, i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trapezoid_integral() {
        let inp = inputs(vec![0.0, 1.0, 2.0, 3.0], 0.0, 2, 1.0);
        assert!((inp.integral(3) - 0.45).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(EnvelopeInputs::new(vec![-1.0], 0.1, 0.0, 2, 1.0, vec![1]).is_err());
        assert!(EnvelopeInputs::new(vec![1.0], 0.1, 0.0, 1, 1.0, vec![1]).is_err());
        assert!(EnvelopeInputs::new(vec![1.0], 0.1, 0.0, 2, 1.0, vec![3]).is_err());
    }

    #[test]
    fn lemma_d_examples() {
        let model = TorusModel::new(periodic_laplacian(4), vec![0.0; 4]).unwrap();
        let phi = PureState::normalized(
            vec![crate::linalg::C64::new(1.0, 0.0); 4],
            TensorShape::new(vec![4, 1]).unwrap(),
        )
        .unwrap();
        let rho = crate::model::density_of_lifted(&phi).unwrap();
        let r = check_lemma_d(&model, &rho, &phi).unwrap();
        assert_eq!(r.cancel_defect, 0.0);
        assert_eq!(r.projected_norm, 0.0);

        let model = TorusModel::new(periodic_laplacian(4), vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let r = check_lemma_d(&model, &rho, &phi).unwrap();
        assert!((r.lambda - 0.5).abs() < 1e-14);
        assert!(r.holds());
        assert!(r.projected_norm <= 0.5 + 1e-10);

        let mut rng = test_rng(60);
        let model = TorusModel::new(periodic_laplacian(3), vec![0.4, -1.3, -1.3]).unwrap();
        let phi = random_pure_state(&mut rng, TensorShape::new(vec![3, 2]).unwrap());
        let rho = crate::model::density_of_lifted(&phi).unwrap();
        assert!(check_lemma_d(&model, &rho, &phi).unwrap().holds());
    }

    #[test]
    fn report_failure_names_first_violation() {
        let ok = MarginRecord::new(0.0, Some(1), Inequality::Trace, 0.1, 0.2, 1e-8);
        let bad = MarginRecord::new(0.5, None, Inequality::Pickl, 0.3, 0.2, 1e-8);
        let report = MarginReport::from_records(vec![ok, bad]);
        assert!(!report.passed());
        match report.into_result() {
            Err(Error::CertificationFailure {
                t, k, inequality, ..
            }) => {
                assert_eq!((t, k, inequality.as_str()), (0.5, None, "pickl"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
