//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comment
//! name = paper-check
//! sites = 4
//! particles = 3
//! potential = bounded
//! strength = 1.0
//! scenario = product
//! ```
//!
//! Unknown keys are rejected. Every key can be overridden from the command
//! line.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dynamics::TimeGrid;
use crate::error::{Error, Result};
use crate::model::{
    bounded_potential, coulomb_like_potential, periodic_laplacian, spiky_potential, TorusModel,
    NBODY_DIM_BUDGET,
};

/// Largest lifted N-body dimension `(L·a)^N`.
pub const LIFTED_DIM_BUDGET: usize = 200_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Zero,
    Bounded,
    CoulombLike,
    Spiky,
    Custom(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Product,
    NearProduct,
    Mixture,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub sites: usize,
    pub particles: usize,
    pub hopping: f64,
    pub potential: PotentialKind,
    pub strength: f64,
    pub regularizer: f64,
    pub scenario: ScenarioKind,
    pub rank: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub dt: f64,
    pub t_final: f64,
    pub sample_stride: usize,
    pub k_values: Vec<usize>,
    pub tol: f64,
    pub lemma_d: bool,
    /// Negative control: recorded `α̃` is multiplied by this before certification.
    pub alpha_scale: f64,
    /// Negative control: `Λ` samples are multiplied by this before certification.
    pub lambda_scale: f64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "run".into(),
            sites: 4,
            particles: 3,
            hopping: 1.0,
            potential: PotentialKind::Bounded,
            strength: 1.0,
            regularizer: 1.0,
            scenario: ScenarioKind::Product,
            rank: 2,
            epsilon: 0.1,
            seed: 1,
            dt: 1e-3,
            t_final: 1.0,
            sample_stride: 10,
            k_values: vec![1, 2],
            tol: crate::bounds::BASE_SLACK,
            lemma_d: true,
            alpha_scale: 1.0,
            lambda_scale: 1.0,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// L=2, N=2, T=0.1.
    pub fn smoke() -> Self {
        Self {
            name: "smoke".into(),
            sites: 2,
            particles: 2,
            rank: 2,
            t_final: 0.1,
            k_values: vec![1, 2],
            ..Self::default()
        }
    }

    /// L=4, N=3, bounded potential, T=1.
    pub fn paper_check() -> Self {
        Self {
            name: "paper-check".into(),
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "smoke" => Some(Self::smoke()),
            "paper-check" => Some(Self::paper_check()),
            _ => None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::InvalidConfig(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    /// Reads a config file, or a preset when `path` names one and no such
    /// file exists.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            if let Some(cfg) = path.to_str().and_then(Self::preset) {
                return Ok(cfg);
            }
        }
        let mut cfg = Self::parse(&std::fs::read_to_string(path)?)?;
        if cfg.name == "run" {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                cfg.name = stem.to_string();
            }
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("`{key}`: cannot parse `{value}`")))
        }
        fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
            value.split(',').map(|v| num(key, v.trim())).collect()
        }
        match key {
            "name" => self.name = value.to_string(),
            "sites" | "L" => self.sites = num(key, value)?,
            "particles" | "N" => self.particles = num(key, value)?,
            "hopping" => self.hopping = num(key, value)?,
            "potential" => {
                self.potential = match value {
                    "zero" => PotentialKind::Zero,
                    "bounded" => PotentialKind::Bounded,
                    "coulomb" | "coulomb_like" => PotentialKind::CoulombLike,
                    "spiky" => PotentialKind::Spiky,
                    _ => PotentialKind::Custom(list(key, value)?),
                }
            }
            "strength" => self.strength = num(key, value)?,
            "regularizer" => self.regularizer = num(key, value)?,
            "scenario" => {
                self.scenario = match value {
                    "product" => ScenarioKind::Product,
                    "near_product" | "near-product" => ScenarioKind::NearProduct,
                    "mixture" => ScenarioKind::Mixture,
                    _ => return Err(Error::InvalidConfig(format!("unknown scenario `{value}`"))),
                }
            }
            "rank" => self.rank = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "dt" => self.dt = num(key, value)?,
            "t_final" => self.t_final = num(key, value)?,
            "sample_stride" => self.sample_stride = num(key, value)?,
            "k" => self.k_values = list(key, value)?,
            "tol" => self.tol = num(key, value)?,
            "lemma_d" => {
                self.lemma_d = match value {
                    "true" | "yes" | "1" => true,
                    "false" | "no" | "0" => false,
                    _ => {
                        return Err(Error::InvalidConfig(format!(
                            "`lemma_d`: expected a boolean, got `{value}`"
                        )))
                    }
                }
            }
            "alpha_scale" => self.alpha_scale = num(key, value)?,
            "lambda_scale" => self.lambda_scale = num(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            _ => return Err(Error::InvalidConfig(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Checks sizes and ranges before any computation.
    pub fn validate(&self) -> Result<()> {
        if self.particles < 2 {
            return Err(Error::InvalidConfig(format!(
                "N = {} but the estimates hold for N >= 2",
                self.particles
            )));
        }
        if self.sites < 2 {
            return Err(Error::InvalidConfig(format!(
                "L = {} but the ring needs L >= 2",
                self.sites
            )));
        }
        crate::model::checked_power(self.sites, self.particles, NBODY_DIM_BUDGET)?;
        crate::model::checked_power(self.sites * self.sites, self.particles, LIFTED_DIM_BUDGET)?;
        if self.rank == 0 || self.rank > self.sites {
            return Err(Error::InvalidConfig(format!(
                "rank {} outside 1..={}",
                self.rank, self.sites
            )));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::InvalidConfig(format!(
                "epsilon = {} outside [0, 1)",
                self.epsilon
            )));
        }
        if self.k_values.is_empty() || self.k_values.iter().any(|&k| k == 0 || k > self.particles) {
            return Err(Error::InvalidConfig(format!(
                "k values {:?} must lie in 1..={}",
                self.k_values, self.particles
            )));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tol = {} must be nonnegative",
                self.tol
            )));
        }
        if !(self.alpha_scale > 0.0 && self.lambda_scale > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha_scale = {} and lambda_scale = {} must be positive",
                self.alpha_scale, self.lambda_scale
            )));
        }
        if let PotentialKind::Custom(v) = &self.potential {
            if v.len() != self.sites {
                return Err(Error::InvalidConfig(format!(
                    "custom potential has {} values for {} sites",
                    v.len(),
                    self.sites
                )));
            }
        }
        self.grid()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.t_final, self.dt, self.sample_stride)
    }

    pub fn potential_values(&self) -> Vec<f64> {
        let l = self.sites;
        match &self.potential {
            PotentialKind::Zero => vec![0.0; l],
            PotentialKind::Bounded => bounded_potential(l, self.strength),
            PotentialKind::CoulombLike => {
                coulomb_like_potential(l, self.strength, self.regularizer)
            }
            PotentialKind::Spiky => spiky_potential(l, self.strength),
            PotentialKind::Custom(v) => v.clone(),
        }
    }

    pub fn model(&self) -> Result<TorusModel> {
        TorusModel::new(
            periodic_laplacian(self.sites).scale_real(self.hopping),
            self.potential_values(),
        )
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let potential = match &self.potential {
            PotentialKind::Zero => "zero".to_string(),
            PotentialKind::Bounded => "bounded".to_string(),
            PotentialKind::CoulombLike => "coulomb".to_string(),
            PotentialKind::Spiky => "spiky".to_string(),
            PotentialKind::Custom(v) => v
                .iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(","),
        };
        let scenario = match self.scenario {
            ScenarioKind::Product => "product",
            ScenarioKind::NearProduct => "near_product",
            ScenarioKind::Mixture => "mixture",
        };
        let k = self
            .k_values
            .iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(",");
        writeln!(f, "name = {}", self.name)?;
        writeln!(f, "sites = {}", self.sites)?;
        writeln!(f, "particles = {}", self.particles)?;
        writeln!(f, "hopping = {:?}", self.hopping)?;
        writeln!(f, "potential = {potential}")?;
        writeln!(f, "strength = {:?}", self.strength)?;
        writeln!(f, "regularizer = {:?}", self.regularizer)?;
        writeln!(f, "scenario = {scenario}")?;
        writeln!(f, "rank = {}", self.rank)?;
        writeln!(f, "epsilon = {:?}", self.epsilon)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "dt = {:?}", self.dt)?;
        writeln!(f, "t_final = {:?}", self.t_final)?;
        writeln!(f, "sample_stride = {}", self.sample_stride)?;
        writeln!(f, "k = {k}")?;
        writeln!(f, "tol = {:?}", self.tol)?;
        writeln!(f, "lemma_d = {}", self.lemma_d)?;
        writeln!(f, "alpha_scale = {:?}", self.alpha_scale)?;
        writeln!(f, "lambda_scale = {:?}", self.lambda_scale)?;
        writeln!(f, "out_dir = {}", self.out_dir.display())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let text = "# demo\nsites = 3\nparticles = 2\npotential = coulomb  # regularized\nk = 1, 2\nscenario = near-product\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.sites, 3);
        assert_eq!(cfg.potential, PotentialKind::CoulombLike);
        assert_eq!(cfg.k_values, vec![1, 2]);
        assert_eq!(cfg.scenario, ScenarioKind::NearProduct);
        let again = ExperimentConfig::parse(&cfg.to_string()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn custom_potential_list() {
        let cfg = ExperimentConfig::parse("sites = 4\npotential = 0, 1, 0, 1").unwrap();
        assert_eq!(cfg.potential_values(), vec![0.0, 1.0, 0.0, 1.0]);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::parse("sites: 3").is_err());
        assert!(ExperimentConfig::parse("colour = red").is_err());
        assert!(ExperimentConfig::parse("sites = three").is_err());
        let one_particle = ExperimentConfig {
            particles: 1,
            k_values: vec![1],
            ..ExperimentConfig::default()
        };
        assert!(matches!(
            one_particle.validate(),
            Err(Error::InvalidConfig(_))
        ));
        let huge = ExperimentConfig {
            sites: 8,
            particles: 5,
            ..ExperimentConfig::default()
        };
        assert!(matches!(
            huge.validate(),
            Err(Error::SizeBudgetExceeded { .. })
        ));
    }

    #[test]
    fn presets_validate() {
        ExperimentConfig::smoke().validate().unwrap();
        ExperimentConfig::paper_check().validate().unwrap();
        assert!(ExperimentConfig::preset("nope").is_none());
    }
}
