use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use mflab::harness::checks::all_suites;
use mflab::harness::{mixture_demo, run, write_mixture, write_run, ExperimentConfig, RunReport};

const EXIT_PASS: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_CERTIFICATION: u8 = 2;

/// Mean-field propagation-of-chaos laboratory.
#[derive(Parser, Debug)]
#[command(name = "mflab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one configuration file or preset (`smoke`, `paper-check`).
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run every configuration matching a glob concurrently.
    Sweep {
        pattern: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Randomized inequality suites only.
    Check {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Mixed Hartree flow versus the mixture of pure Hartree flows.
    DemoMixture {
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args, Debug, Clone, Default)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    /// Comma-separated marginal orders, e.g. `1,2`.
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) -> mflab::Result<()> {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(dir) = &self.out_dir {
            cfg.out_dir = dir.clone();
        }
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        if let Some(t) = self.t_final {
            cfg.t_final = t;
        }
        if let Some(k) = &self.k {
            cfg.set("k", k)?;
        }
        if let Some(tol) = self.tol {
            cfg.tol = tol;
        }
        cfg.validate()
    }
}

fn load(path: &Path, overrides: &Overrides) -> mflab::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    overrides.apply(&mut cfg)?;
    Ok(cfg)
}

fn print_report(report: &RunReport, dir: &Path) {
    let s = &report.summary;
    println!(
        "{} [{}] L={} N={} alpha0={:.3e} min pickl margin={:.3e} violations={} -> {}",
        s.name,
        if s.passed { "PASS" } else { "FAIL" },
        s.sites,
        s.particles,
        s.alpha0,
        s.min_margin_pickl,
        s.violations,
        dir.display()
    );
    for f in &s.failures {
        println!("  failure: {f}");
    }
    for w in &s.warnings {
        println!("  warning: {w}");
    }
}

fn run_one(cfg: &ExperimentConfig, dir: &Path) -> mflab::Result<bool> {
    let report = run(cfg)?;
    write_run(&report, dir)?;
    print_report(&report, dir);
    Ok(report.summary.passed)
}

fn cmd_run(path: &Path, overrides: &Overrides) -> mflab::Result<u8> {
    let cfg = load(path, overrides)?;
    let passed = run_one(&cfg, &cfg.out_dir)?;
    Ok(if passed {
        EXIT_PASS
    } else {
        EXIT_CERTIFICATION
    })
}

fn cmd_sweep(pattern: &str, overrides: &Overrides) -> mflab::Result<u8> {
    let paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| mflab::Error::InvalidConfig(format!("bad glob `{pattern}`: {e}")))?
        .filter_map(|p| p.ok())
        .collect();
    if paths.is_empty() {
        return Err(mflab::Error::InvalidConfig(format!(
            "no configs match `{pattern}`"
        )));
    }
    let configs = paths
        .iter()
        .map(|p| load(p, overrides))
        .collect::<mflab::Result<Vec<_>>>()?;
    let outcomes: Vec<mflab::Result<bool>> = configs
        .par_iter()
        .map(|cfg| run_one(cfg, &cfg.out_dir.join(&cfg.name)))
        .collect();
    let (mut failed, mut errored) = (false, false);
    for (cfg, outcome) in configs.iter().zip(outcomes) {
        match outcome {
            Ok(passed) => failed |= !passed,
            Err(e) => {
                eprintln!("{}: {e}", cfg.name);
                errored = true;
            }
        }
    }
    let code = if errored {
        EXIT_USAGE
    } else if failed {
        EXIT_CERTIFICATION
    } else {
        EXIT_PASS
    };
    Ok(code)
}

fn cmd_check(seed: u64) -> mflab::Result<u8> {
    let suites = all_suites(seed)?;
    for s in &suites {
        println!("{s}");
    }
    Ok(if suites.iter().all(|s| s.passed()) {
        EXIT_PASS
    } else {
        EXIT_CERTIFICATION
    })
}

fn cmd_mixture(overrides: &Overrides) -> mflab::Result<u8> {
    let mut cfg = ExperimentConfig::paper_check();
    cfg.name = "mixture".into();
    overrides.apply(&mut cfg)?;
    let report = mixture_demo(&cfg.model()?, cfg.particles, cfg.seed, &cfg.grid()?)?;
    write_mixture(&report, &cfg.out_dir)?;
    let ok = report.initial_defect.abs() <= 1e-12 && report.max_flow_gap > 0.0;
    println!(
        "mixture [{}] initial defect={:.3e} max flow gap={:.6e} at t={} -> {}",
        if ok { "PASS" } else { "FAIL" },
        report.initial_defect,
        report.max_flow_gap,
        report.max_gap_time,
        cfg.out_dir.display()
    );
    Ok(if ok { EXIT_PASS } else { EXIT_CERTIFICATION })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_PASS
            });
        }
    };
    let outcome = match &cli.command {
        Command::Run { config, overrides } => cmd_run(config, overrides),
        Command::Sweep { pattern, overrides } => cmd_sweep(pattern, overrides),
        Command::Check { seed } => cmd_check(*seed),
        Command::DemoMixture { overrides } => cmd_mixture(overrides),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
