//! Configuration, scenarios, the end-to-end run and report emission.

pub mod checks;
pub mod config;
pub mod output;
pub mod run;
pub mod scenario;

pub use config::{ExperimentConfig, PotentialKind, ScenarioKind, LIFTED_DIM_BUDGET};
pub use output::{write_mixture, write_run};
pub use run::{run, simulate, RunReport, RunSummary};
pub use scenario::{mixture_demo, MixtureReport};
