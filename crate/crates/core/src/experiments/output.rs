//! CSV and JSON writers for experiment results.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{summarize, ExperimentError, ScenarioResult, ScenarioSpec, SweepPoint};
use crate::queueing::{g_pool, QueueParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub sweep: String,
    pub value: f64,
    pub period_length: u32,
    pub replications: usize,
    /// Mean over replications with a defined improvement.
    pub mean_improvement_percent: Option<f64>,
    pub mean_avg_shared_per_period: f64,
    pub mean_satisfied_with: f64,
    pub mean_satisfied_without: f64,
    pub clients: usize,
    pub clamped: bool,
}

/// Everything needed to reproduce a result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub scenario: ScenarioSpec,
    pub points: Vec<SweepPoint>,
    pub files: Vec<String>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Writes `<stem>.csv` (one row per run pair), `<stem>_summary.csv` (one row
/// per sweep point) and `<stem>_manifest.json` into `dir`.
pub fn write_scenario(
    result: &ScenarioResult,
    dir: &Path,
    stem: &str,
    command: &str,
) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir)?;
    let rows_path = dir.join(format!("{stem}.csv"));
    let summary_path = dir.join(format!("{stem}_summary.csv"));
    let manifest_path = dir.join(format!("{stem}_manifest.json"));

    let n_ops = result.spec.base.system.num_operators();
    let mut w = csv::Writer::from_path(&rows_path)?;
    let mut header: Vec<String> = [
        "sweep",
        "value",
        "period_length",
        "replication",
        "seed",
        "improvement_percent",
        "timely_with",
        "timely_without",
        "avg_shared_per_period",
        "clients",
        "satisfied_with",
        "satisfied_without",
        "sharing_balanced",
        "max_net_sharing",
        "max_delivery_debt_with",
        "max_sharing_debt_with",
        "max_delivery_debt_without",
        "clamped",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(result.spec.base.system.operators.iter().map(|o| format!("improvement_percent_{o}")));
    w.write_record(&header)?;
    for r in &result.rows {
        let mut rec = vec![
            r.sweep.clone(),
            r.value.to_string(),
            r.period_length.to_string(),
            r.replication.to_string(),
            r.seed.to_string(),
            opt(r.improvement_percent),
            r.timely_with.to_string(),
            r.timely_without.to_string(),
            r.avg_shared_per_period.to_string(),
            r.clients.to_string(),
            r.satisfied_with.to_string(),
            r.satisfied_without.to_string(),
            r.sharing_balanced.to_string(),
            r.max_net_sharing.to_string(),
            r.max_delivery_debt_with.to_string(),
            r.max_sharing_debt_with.to_string(),
            r.max_delivery_debt_without.to_string(),
            r.clamped.to_string(),
        ];
        rec.extend((0..n_ops).map(|i| opt(r.operator_improvement_percent.get(i).copied().flatten())));
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(&summary_path)?;
    for s in summarize(&result.rows) {
        w.serialize(s)?;
    }
    w.flush()?;

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        seed: result.spec.seed,
        scenario: result.spec.clone(),
        points: result.points.clone(),
        files: vec![file_name(&rows_path), file_name(&summary_path)],
    };
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(vec![rows_path, summary_path, manifest_path])
}

/// Pooling gain in percent over a grid of deadlines, as `D,gain_percent`.
pub fn emit_fig1(mu: f64, rho: f64, deadlines: &[f64], path: &Path) -> Result<Vec<(f64, f64)>, ExperimentError> {
    let points = deadlines
        .iter()
        .map(|&d| Ok((d, 100.0 * g_pool(&QueueParams::new(mu, rho, d)?)?)))
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["D", "gain_percent"])?;
    for (d, g) in &points {
        w.write_record([d.to_string(), g.to_string()])?;
    }
    w.flush()?;
    Ok(points)
}
