//! Scenario sweeps with paired sharing / no-sharing runs, and the output
//! files they produce.
//!
//! Each sweep point and replication runs both policies from the same seed,
//! so they see identical arrivals and channels. Replication seeds depend only
//! on the master seed and the replication index, which keeps the comparison
//! paired across sweep points as well. Jobs run on a rayon pool; results are
//! assembled in (sweep point, replication) order so output does not depend on
//! scheduling.

pub mod config;
mod output;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arrivals::{ArrivalError, ArrivalKind, ArrivalModel};
use crate::metrics::{self, MetricsError, Tolerances};
use crate::model::{fill_per_client, ModelError, PerRegion, SystemConfig};
use crate::policy::PolicyKind;
use crate::queueing::QueueError;
use crate::rng::{derive_seed, domain};
use crate::simulator::{run, RunConfig, RunRecord, SimError, TraceLevel};

pub use config::{crossed_rates, imbalance_rates, ExperimentConfig};
pub use output::{emit_fig1, write_scenario, Manifest, SummaryRow};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Arrival(#[from] ArrivalError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ExperimentError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentError::Config(_) | ExperimentError::Model(_) | ExperimentError::Arrival(_) => "config",
            ExperimentError::Simulation(_) => "simulation",
            ExperimentError::Metrics(_) => "metrics",
            ExperimentError::Queue(_) => "domain",
            ExperimentError::Io(_) | ExperimentError::Csv(_) | ExperimentError::Json(_) => "io",
        }
    }
}

/// How the throughput requirement follows the arrival rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Requirement {
    /// `q = fraction * rate` for every client, recomputed at each sweep point.
    RateFraction(f64),
    /// Use `system.throughput_req` as given.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sweep {
    /// The base scenario only.
    None,
    /// Cap on cross-operator slots per region and period.
    SharingCap { caps: Vec<u32> },
    /// Rates `scale * beta` and `scale * (1 - beta)`, crossed over the two
    /// regions.
    Imbalance { betas: Vec<f64>, scale: f64 },
    /// Rates `0.25 gamma` and `0.75 gamma`, crossed over the two regions, for
    /// each period length.
    Load { gammas: Vec<f64>, period_lengths: Vec<u32> },
}

impl Sweep {
    pub fn name(&self) -> &'static str {
        match self {
            Sweep::None => "none",
            Sweep::SharingCap { .. } => "sharing_cap",
            Sweep::Imbalance { .. } => "imbalance",
            Sweep::Load { .. } => "load",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBase {
    pub system: SystemConfig,
    pub requirement: Requirement,
    pub arrival_kind: ArrivalKind,
    pub persistence: Option<f64>,
    /// Per-client arrival rate for each `[operator][region]`.
    pub rates: PerRegion<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub base: ScenarioBase,
    pub sweep: Sweep,
    pub replications: usize,
    pub seed: u64,
    /// Policy recorded by the single-run path; sweeps always run both.
    pub policy: PolicyKind,
    pub trace: TraceLevel,
    pub parallelism: Option<usize>,
    pub tolerances: Tolerances,
}

/// One fully resolved sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub period_length: u32,
    pub sharing_cap: Option<u32>,
    /// Rates actually simulated, after clamping to [0, 1].
    pub rates: PerRegion<f64>,
    /// True when some requested rate exceeded 1 and was clamped.
    pub clamped: bool,
}

/// One (sweep point, replication) pair of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep: String,
    pub value: f64,
    pub period_length: u32,
    pub replication: usize,
    pub seed: u64,
    /// `None` when the no-sharing run delivered nothing.
    pub improvement_percent: Option<f64>,
    pub operator_improvement_percent: Vec<Option<f64>>,
    pub timely_with: f64,
    pub timely_without: f64,
    pub avg_shared_per_period: f64,
    pub clients: usize,
    pub satisfied_with: usize,
    pub satisfied_without: usize,
    pub sharing_balanced: bool,
    pub max_net_sharing: f64,
    pub max_delivery_debt_with: f64,
    pub max_sharing_debt_with: f64,
    pub max_delivery_debt_without: f64,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub spec: ScenarioSpec,
    pub points: Vec<SweepPoint>,
    pub rows: Vec<ResultRow>,
}

fn check_grid(name: &str, values: &[f64], lo: f64, hi: f64) -> Result<(), ExperimentError> {
    if values.is_empty() {
        return Err(ExperimentError::Config(format!("{name} grid is empty")));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= lo && **v <= hi)) {
        return Err(ExperimentError::Config(format!("{name} value {v} outside [{lo}, {hi}]")));
    }
    Ok(())
}

fn clamp_rates(rates: PerRegion<f64>) -> (PerRegion<f64>, bool) {
    let clamped = rates.iter().flatten().any(|&r| r > 1.0);
    (
        rates
            .into_iter()
            .map(|v| v.into_iter().map(|r| r.min(1.0)).collect())
            .collect(),
        clamped,
    )
}

impl ScenarioSpec {
    fn require_two_by_two(&self) -> Result<(), ExperimentError> {
        let s = &self.base.system;
        if s.num_operators() == 2 && s.num_regions() == 2 {
            Ok(())
        } else {
            Err(ExperimentError::Config(format!(
                "{} sweep needs 2 operators and 2 regions",
                self.sweep.name()
            )))
        }
    }

    /// Validates the sweep grid and resolves every point.
    pub fn points(&self) -> Result<Vec<SweepPoint>, ExperimentError> {
        let base = &self.base;
        let t = base.system.period_length;
        let cap = base.system.sharing_cap;
        match &self.sweep {
            Sweep::None => {
                check_grid("arrivals.rates", &base.rates.iter().flatten().copied().collect::<Vec<_>>(), 0.0, 1.0)?;
                Ok(vec![SweepPoint {
                    value: 0.0,
                    period_length: t,
                    sharing_cap: cap,
                    rates: base.rates.clone(),
                    clamped: false,
                }])
            }
            Sweep::SharingCap { caps } => {
                if caps.is_empty() {
                    return Err(ExperimentError::Config("caps grid is empty".into()));
                }
                check_grid("arrivals.rates", &base.rates.iter().flatten().copied().collect::<Vec<_>>(), 0.0, 1.0)?;
                Ok(caps
                    .iter()
                    .map(|&l| SweepPoint {
                        value: f64::from(l),
                        period_length: t,
                        sharing_cap: Some(l),
                        rates: base.rates.clone(),
                        clamped: false,
                    })
                    .collect())
            }
            Sweep::Imbalance { betas, scale } => {
                self.require_two_by_two()?;
                check_grid("betas", betas, 0.0, 1.0)?;
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(ExperimentError::Config(format!("scale must be > 0, got {scale}")));
                }
                Ok(betas
                    .iter()
                    .map(|&b| {
                        let (rates, clamped) = clamp_rates(imbalance_rates(b, *scale));
                        SweepPoint {
                            value: b,
                            period_length: t,
                            sharing_cap: cap,
                            rates,
                            clamped,
                        }
                    })
                    .collect())
            }
            Sweep::Load { gammas, period_lengths } => {
                self.require_two_by_two()?;
                check_grid("gammas", gammas, 0.0, f64::MAX)?;
                if period_lengths.is_empty() || period_lengths.contains(&0) {
                    return Err(ExperimentError::Config(
                        "period_lengths must be non-empty and positive".into(),
                    ));
                }
                Ok(period_lengths
                    .iter()
                    .flat_map(|&t| {
                        gammas.iter().map(move |&g| {
                            let (rates, clamped) = clamp_rates(crossed_rates(0.25 * g, 0.75 * g));
                            SweepPoint {
                                value: g,
                                period_length: t,
                                sharing_cap: cap,
                                rates,
                                clamped,
                            }
                        })
                    })
                    .collect())
            }
        }
    }

    pub fn replication_seed(&self, replication: usize) -> u64 {
        derive_seed(self.seed, domain::REPLICATION, &[replication as u64])
    }

    /// Run configuration for one sweep point, replication and policy.
    pub fn run_config(
        &self,
        point: &SweepPoint,
        replication: usize,
        policy: PolicyKind,
    ) -> Result<RunConfig, ExperimentError> {
        let mut system = self.base.system.clone();
        system.period_length = point.period_length;
        system.sharing_cap = point.sharing_cap;
        if let Requirement::RateFraction(f) = self.base.requirement {
            let mut q = fill_per_client(&system.clients_per, 0.0);
            for (i, per_region) in q.iter_mut().enumerate() {
                for (r, clients) in per_region.iter_mut().enumerate() {
                    clients.fill(f * point.rates[i][r]);
                }
            }
            system.throughput_req = q;
        }
        system.validate()?;
        let arrivals = point
            .rates
            .iter()
            .map(|per_region| {
                per_region
                    .iter()
                    .map(|&rate| ArrivalModel {
                        kind: self.base.arrival_kind,
                        rate,
                        persistence: self.base.persistence,
                    })
                    .collect()
            })
            .collect();
        Ok(RunConfig {
            system,
            arrivals,
            policy,
            seed: self.replication_seed(replication),
            trace: self.trace,
        })
    }

    fn with_pool<T: Send>(&self, job: impl FnOnce() -> T + Send) -> Result<T, ExperimentError> {
        match self.parallelism {
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| ExperimentError::Config(format!("thread pool: {e}")))?;
                Ok(pool.install(job))
            }
            None => Ok(job()),
        }
    }
}

/// Paired summary of one (sharing, no-sharing) run pair.
pub fn compare(
    cfg: &SystemConfig,
    with: &RunRecord,
    without: &RunRecord,
    tol: &Tolerances,
) -> Result<PairedOutcome, ExperimentError> {
    let improvement = match metrics::improvement_percent(with, without) {
        Ok(v) => Some(v),
        Err(MetricsError::ZeroBaseline) => None,
        Err(e) => return Err(e.into()),
    };
    let balanced = metrics::sharing_satisfied(with, cfg, tol)?.values().all(|&b| b);
    Ok(PairedOutcome {
        improvement_percent: improvement,
        operator_improvement_percent: metrics::operator_improvement_percent(with, without),
        satisfied_with: metrics::count_satisfied(&metrics::throughput_satisfied(with, cfg, tol)?),
        satisfied_without: metrics::count_satisfied(&metrics::throughput_satisfied(without, cfg, tol)?),
        sharing_balanced: balanced,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedOutcome {
    pub improvement_percent: Option<f64>,
    pub operator_improvement_percent: Vec<Option<f64>>,
    pub satisfied_with: usize,
    pub satisfied_without: usize,
    pub sharing_balanced: bool,
}

/// Runs every sweep point and replication with both policies.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioResult, ExperimentError> {
    let points = spec.points()?;
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..spec.replications).map(move |r| (p, r)))
        .collect();
    // build every run configuration up front so bad inputs fail before any run
    let configs = jobs
        .iter()
        .map(|&(p, r)| {
            Ok((
                spec.run_config(&points[p], r, PolicyKind::Sharing)?,
                spec.run_config(&points[p], r, PolicyKind::NoSharing)?,
            ))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;

    let rows = spec.with_pool(|| {
        jobs.par_iter()
            .zip(configs.par_iter())
            .map(|(&(p, rep), (with_rc, without_rc))| {
                let with = run(with_rc)?;
                let without = run(without_rc)?;
                let cmp = compare(&with_rc.system, &with, &without, &spec.tolerances)?;
                let point = &points[p];
                Ok(ResultRow {
                    sweep: spec.sweep.name().to_string(),
                    value: point.value,
                    period_length: point.period_length,
                    replication: rep,
                    seed: with_rc.seed,
                    improvement_percent: cmp.improvement_percent,
                    operator_improvement_percent: cmp.operator_improvement_percent,
                    timely_with: with.total_timely(),
                    timely_without: without.total_timely(),
                    avg_shared_per_period: with.avg_shared_per_period,
                    clients: with_rc.system.total_clients(),
                    satisfied_with: cmp.satisfied_with,
                    satisfied_without: cmp.satisfied_without,
                    sharing_balanced: cmp.sharing_balanced,
                    max_net_sharing: with.net_sharing.iter().flatten().copied().fold(0.0, f64::max),
                    max_delivery_debt_with: with.final_debts.max_delivery_debt(),
                    max_sharing_debt_with: with.final_debts.max_sharing_debt(),
                    max_delivery_debt_without: without.final_debts.max_delivery_debt(),
                    clamped: point.clamped,
                })
            })
            .collect::<Result<Vec<ResultRow>, ExperimentError>>()
    })??;

    let mut rows = rows;
    rows.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then(a.period_length.cmp(&b.period_length))
            .then(a.replication.cmp(&b.replication))
    });
    Ok(ScenarioResult {
        spec: spec.clone(),
        points,
        rows,
    })
}

/// Runs the configured policy alone for every replication of the base point.
pub fn run_single(spec: &ScenarioSpec) -> Result<Vec<RunRecord>, ExperimentError> {
    let points = spec.points()?;
    let point = &points[0];
    let configs = (0..spec.replications)
        .map(|r| spec.run_config(point, r, spec.policy))
        .collect::<Result<Vec<_>, _>>()?;
    spec.with_pool(|| {
        configs
            .par_iter()
            .map(|rc| run(rc).map_err(ExperimentError::from))
            .collect::<Result<Vec<_>, _>>()
    })?
}

/// Mean over replications of one sweep point.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut out: Vec<SummaryRow> = Vec::new();
    for row in rows {
        let same = out
            .last()
            .is_some_and(|s| s.value == row.value && s.period_length == row.period_length);
        if !same {
            out.push(SummaryRow {
                sweep: row.sweep.clone(),
                value: row.value,
                period_length: row.period_length,
                replications: 0,
                mean_improvement_percent: None,
                mean_avg_shared_per_period: 0.0,
                mean_satisfied_with: 0.0,
                mean_satisfied_without: 0.0,
                clients: row.clients,
                clamped: row.clamped,
            });
        }
        let s = out.last_mut().expect("pushed above");
        s.replications += 1;
        s.mean_avg_shared_per_period += row.avg_shared_per_period;
        s.mean_satisfied_with += row.satisfied_with as f64;
        s.mean_satisfied_without += row.satisfied_without as f64;
    }
    for s in &mut out {
        let group: Vec<&ResultRow> = rows
            .iter()
            .filter(|r| r.value == s.value && r.period_length == s.period_length)
            .collect();
        let n = s.replications as f64;
        s.mean_avg_shared_per_period /= n;
        s.mean_satisfied_with /= n;
        s.mean_satisfied_without /= n;
        let imps: Vec<f64> = group.iter().filter_map(|r| r.improvement_percent).collect();
        if !imps.is_empty() {
            s.mean_improvement_percent = Some(imps.iter().sum::<f64>() / imps.len() as f64);
        }
    }
    out
}

/// Defaults of the evaluation section: two operators, two regions, ten
/// clients each, `T = 5`, `P = 0.99`, `q = 0.95 * rate`, bound `0.001`,
/// `K = 10^4`.
pub fn default_config() -> ExperimentConfig {
    ExperimentConfig::default()
}

pub fn fig3_sweep() -> Sweep {
    Sweep::SharingCap {
        caps: (0..=5).collect(),
    }
}

pub fn fig4_sweep() -> Sweep {
    Sweep::Imbalance {
        betas: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
        scale: 1.0,
    }
}

pub fn gamma_grid(step: f64, max: f64) -> Vec<f64> {
    let n = (max / step).round() as usize;
    (0..=n).map(|k| (k as f64 * step * 1e9).round() / 1e9).collect()
}

pub fn fig5_sweep() -> Sweep {
    Sweep::Load {
        gammas: gamma_grid(0.1, 2.0),
        period_lengths: vec![2, 4, 6, 8],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(sweep: Sweep) -> ScenarioSpec {
        let mut cfg = default_config();
        cfg.system.horizon = 300;
        cfg.policy.replications = 2;
        cfg.policy.seed = 5;
        cfg.sweep = Some(sweep);
        cfg.resolve().unwrap()
    }

    #[test]
    fn load_points_clamp_rates() {
        let spec = small_spec(Sweep::Load {
            gammas: vec![1.0, 2.0],
            period_lengths: vec![2, 4],
        });
        let pts = spec.points().unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[0].rates, vec![vec![0.25, 0.75], vec![0.75, 0.25]]);
        assert!(!pts[0].clamped);
        assert_eq!(pts[1].rates, vec![vec![0.5, 1.0], vec![1.0, 0.5]]);
        assert!(pts[1].clamped);
        assert_eq!(pts[3].period_length, 4);
        let rc = spec.run_config(&pts[1], 0, PolicyKind::Sharing).unwrap();
        assert!((rc.system.throughput_req[0][1][0] - 0.95).abs() < 1e-12);
        assert_eq!(rc.system.period_length, 2);
    }

    #[test]
    fn imbalance_points_are_crossed() {
        let spec = small_spec(Sweep::Imbalance {
            betas: vec![0.1],
            scale: 0.8,
        });
        let p = &spec.points().unwrap()[0];
        assert!((p.rates[0][0] - 0.08).abs() < 1e-12);
        assert!((p.rates[0][1] - 0.72).abs() < 1e-12);
        assert_eq!(p.rates[0][0], p.rates[1][1]);
        assert_eq!(p.rates[0][1], p.rates[1][0]);
    }

    #[test]
    fn invalid_grids_fail_before_running() {
        for sweep in [
            Sweep::SharingCap { caps: vec![] },
            Sweep::Imbalance {
                betas: vec![0.1, 1.2],
                scale: 1.0,
            },
            Sweep::Imbalance {
                betas: vec![0.1],
                scale: 0.0,
            },
            Sweep::Load {
                gammas: vec![-1.0],
                period_lengths: vec![4],
            },
            Sweep::Load {
                gammas: vec![1.0],
                period_lengths: vec![0],
            },
        ] {
            let mut spec = small_spec(Sweep::None);
            spec.sweep = sweep;
            assert!(matches!(run_scenario(&spec), Err(ExperimentError::Config(_))));
        }
    }

    #[test]
    fn zero_cap_means_zero_improvement() {
        let spec = small_spec(Sweep::SharingCap { caps: vec![0, 3] });
        let res = run_scenario(&spec).unwrap();
        assert_eq!(res.rows.len(), 4);
        for row in res.rows.iter().filter(|r| r.value == 0.0) {
            assert_eq!(row.improvement_percent, Some(0.0));
            assert_eq!(row.avg_shared_per_period, 0.0);
        }
        assert!(res.rows.iter().any(|r| r.value == 3.0 && r.avg_shared_per_period > 0.0));
    }

    #[test]
    fn rows_are_sorted_and_reproducible() {
        let mut spec = small_spec(Sweep::Imbalance {
            betas: vec![0.3, 0.1],
            scale: 1.0,
        });
        spec.parallelism = Some(3);
        let a = run_scenario(&spec).unwrap();
        spec.parallelism = Some(1);
        let b = run_scenario(&spec).unwrap();
        assert_eq!(a.rows, b.rows);
        let keys: Vec<_> = a.rows.iter().map(|r| (r.value, r.replication)).collect();
        assert_eq!(keys, vec![(0.1, 0), (0.1, 1), (0.3, 0), (0.3, 1)]);
        // replication seeds are shared across sweep points
        assert_eq!(a.rows[0].seed, a.rows[2].seed);
        let summary = summarize(&a.rows);
        assert_eq!(summary.len(), 2);
        assert_eq!(summary[0].replications, 2);
    }

    #[test]
    fn zero_load_has_undefined_improvement() {
        let spec = small_spec(Sweep::Load {
            gammas: vec![0.0],
            period_lengths: vec![4],
        });
        let res = run_scenario(&spec).unwrap();
        assert!(res.rows.iter().all(|r| r.improvement_percent.is_none()));
        assert_eq!(summarize(&res.rows)[0].mean_improvement_percent, None);
    }

    #[test]
    fn gamma_grid_is_exact_decimal() {
        let g = gamma_grid(0.1, 2.0);
        assert_eq!(g.len(), 21);
        assert_eq!(g[3], 0.3);
        assert_eq!(g[20], 2.0);
    }
}
