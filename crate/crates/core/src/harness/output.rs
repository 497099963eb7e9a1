//! CSV, JSON and plot-data emission.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::run::RunReport;
use super::scenario::MixtureReport;
use crate::error::{Error, Result};

pub const TRAJECTORY_SCHEMA: &str = "# mflab trajectory v1";
pub const MARGINS_SCHEMA: &str = "# mflab margins v1";
pub const MIXTURE_SCHEMA: &str = "# mflab mixture v1";

fn num(x: f64) -> String {
    format!("{x:.12e}")
}

pub fn trajectory_csv(report: &RunReport) -> String {
    let mut out = String::new();
    let mut header = vec![
        "t",
        "alpha",
        "lambda",
        "int_lambda",
        "pickl_envelope",
        "pickl_margin",
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>();
    for k in &report.config.k_values {
        for col in [
            "fidelity_defect",
            "fidelity_envelope",
            "fidelity_margin",
            "trace_distance",
            "trace_envelope",
            "trace_margin",
            "counting_defect",
        ] {
            header.push(format!("{col}_k{k}"));
        }
    }
    header.extend(
        [
            "norm",
            "energy",
            "two_route",
            "cancel_defect",
            "projected_margin",
        ]
        .map(String::from),
    );
    writeln!(out, "{TRAJECTORY_SCHEMA}").unwrap();
    writeln!(out, "{}", header.join(",")).unwrap();
    for row in &report.rows {
        let mut cols = vec![
            num(row.t),
            num(row.alpha),
            num(row.lambda),
            num(row.int_lambda),
            num(row.pickl_envelope),
            num(row.pickl_envelope - row.alpha),
        ];
        for k in &row.per_k {
            cols.extend([
                num(k.fidelity_defect),
                num(k.fidelity_envelope),
                num(k.fidelity_envelope - k.fidelity_defect),
                num(k.trace_distance),
                num(k.trace_envelope),
                num(k.trace_envelope - k.trace_distance),
                num(k.counting_defect),
            ]);
        }
        cols.extend([num(row.norm), num(row.energy), num(row.two_route)]);
        match &row.lemma_d {
            Some(d) => cols.extend([num(d.cancel_defect), num(d.projected_norm_margin)]),
            None => cols.extend(["nan".to_string(), "nan".to_string()]),
        }
        writeln!(out, "{}", cols.join(",")).unwrap();
    }
    out
}

pub fn margins_csv(report: &RunReport) -> String {
    let mut out = String::new();
    writeln!(out, "{MARGINS_SCHEMA}").unwrap();
    writeln!(out, "t,k,inequality,lhs,rhs,margin,slack,violated").unwrap();
    for r in &report.margins.records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            num(r.t),
            r.k.map_or(String::new(), |k| k.to_string()),
            r.inequality,
            num(r.lhs),
            num(r.rhs),
            num(r.margin),
            num(r.slack),
            r.violated()
        )
        .unwrap();
    }
    out
}

fn dat(header: &str, rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut out = format!("# {header}\n");
    for row in rows {
        let line: Vec<String> = row.into_iter().map(num).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidConfig(format!("serialization failed: {e}")))
}

/// Writes `trajectory.csv`, `margins.csv`, `summary.json`, `config.txt` and
/// `plots/*.dat` into `dir`.
pub fn write_run(report: &RunReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("plots"))?;
    fs::write(dir.join("trajectory.csv"), trajectory_csv(report))?;
    fs::write(dir.join("margins.csv"), margins_csv(report))?;
    fs::write(dir.join("summary.json"), to_json(&report.summary)? + "\n")?;
    fs::write(dir.join("config.txt"), report.config.to_string())?;
    fs::write(
        dir.join("plots/alpha.dat"),
        dat(
            "t alpha pickl_envelope",
            report
                .rows
                .iter()
                .map(|r| vec![r.t, r.alpha, r.pickl_envelope]),
        ),
    )?;
    fs::write(
        dir.join("plots/lambda.dat"),
        dat(
            "t lambda int_lambda",
            report
                .rows
                .iter()
                .map(|r| vec![r.t, r.lambda, r.int_lambda]),
        ),
    )?;
    for (idx, k) in report.config.k_values.iter().enumerate() {
        fs::write(
            dir.join(format!("plots/chaos_k{k}.dat")),
            dat(
                "t fidelity_defect fidelity_envelope trace_distance trace_envelope",
                report.rows.iter().map(|r| {
                    let c = &r.per_k[idx];
                    vec![
                        r.t,
                        c.fidelity_defect,
                        c.fidelity_envelope,
                        c.trace_distance,
                        c.trace_envelope,
                    ]
                }),
            ),
        )?;
    }
    Ok(())
}

pub fn mixture_csv(report: &MixtureReport) -> String {
    let mut out = String::new();
    writeln!(out, "{MIXTURE_SCHEMA}").unwrap();
    writeln!(out, "t,flow_gap,marginal_vs_mixed,marginal_vs_mixture").unwrap();
    for p in &report.points {
        writeln!(
            out,
            "{},{},{},{}",
            num(p.t),
            num(p.flow_gap),
            num(p.marginal_vs_mixed),
            num(p.marginal_vs_mixture)
        )
        .unwrap();
    }
    out
}

/// Writes `mixture.csv`, `summary.json` and `plots/mixture.dat` into `dir`.
pub fn write_mixture(report: &MixtureReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("plots"))?;
    fs::write(dir.join("mixture.csv"), mixture_csv(report))?;
    let summary = serde_json::json!({
        "initial_defect": report.initial_defect,
        "max_flow_gap": report.max_flow_gap,
        "max_gap_time": report.max_gap_time,
        "separated": report.max_flow_gap > 0.0,
    });
    fs::write(dir.join("summary.json"), to_json(&summary)? + "\n")?;
    fs::write(
        dir.join("plots/mixture.dat"),
        dat(
            "t flow_gap marginal_vs_mixed marginal_vs_mixture",
            report
                .points
                .iter()
                .map(|p| vec![p.t, p.flow_gap, p.marginal_vs_mixed, p.marginal_vs_mixture]),
        ),
    )?;
    Ok(())
}
