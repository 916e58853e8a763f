//! Requirement checks and summary statistics over finished runs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DebtState, PerClient, SystemConfig};
use crate::simulator::RunRecord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("run record does not match the configuration: {0}")]
    Mismatch(String),
    #[error("improvement undefined: baseline timely throughput is zero")]
    ZeroBaseline,
    #[error("invalid tolerances: {0}")]
    InvalidTolerance(String),
}

/// Finite-horizon slack on the throughput and sharing-balance requirements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub xi1: f64,
    pub xi2: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { xi1: 0.01, xi2: 0.01 }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.xi1 > 0.0 && self.xi2 > 0.0 && self.xi1.is_finite() && self.xi2.is_finite() {
            Ok(())
        } else {
            Err(MetricsError::InvalidTolerance(format!(
                "xi1 and xi2 must be positive, got {} and {}",
                self.xi1, self.xi2
            )))
        }
    }
}

fn check_layout(rec: &RunRecord, cfg: &SystemConfig) -> Result<(), MetricsError> {
    let ok = rec.per_client_timely.len() == cfg.num_operators()
        && rec
            .per_client_timely
            .iter()
            .zip(&cfg.clients_per)
            .all(|(pr, counts)| pr.len() == counts.len() && pr.iter().zip(counts).all(|(c, &n)| c.len() == n))
        && rec.net_sharing.len() == cfg.num_operators();
    if ok {
        Ok(())
    } else {
        Err(MetricsError::Mismatch("client or operator layout differs".into()))
    }
}

/// Per client: did the measured timely throughput reach `q - xi1`?
pub fn throughput_satisfied(
    rec: &RunRecord,
    cfg: &SystemConfig,
    tol: &Tolerances,
) -> Result<PerClient<bool>, MetricsError> {
    check_layout(rec, cfg)?;
    tol.validate()?;
    Ok(rec
        .per_client_timely
        .iter()
        .zip(&cfg.throughput_req)
        .map(|(pr, qr)| {
            pr.iter()
                .zip(qr)
                .map(|(c, q)| c.iter().zip(q).map(|(&x, &q)| x >= q - tol.xi1).collect())
                .collect()
        })
        .collect())
}

pub fn count_satisfied(flags: &PerClient<bool>) -> usize {
    flags.iter().flatten().flatten().filter(|&&b| b).count()
}

/// Per unordered operator pair `(i, j)`, `i < j`: is the net sharing within
/// `zeta + xi2`?
pub fn sharing_satisfied(
    rec: &RunRecord,
    cfg: &SystemConfig,
    tol: &Tolerances,
) -> Result<BTreeMap<(usize, usize), bool>, MetricsError> {
    check_layout(rec, cfg)?;
    tol.validate()?;
    Ok(cfg
        .ordered_pairs()
        .filter(|&(i, j)| i < j)
        .map(|(i, j)| ((i, j), rec.net_sharing[i][j] <= cfg.sharing_bound[i][j] + tol.xi2))
        .collect())
}

fn improvement(with: f64, without: f64) -> Result<f64, MetricsError> {
    if without == 0.0 {
        return Err(MetricsError::ZeroBaseline);
    }
    Ok(100.0 * (with - without) / without)
}

/// Percentage gain in total timely throughput (summed over all clients).
pub fn improvement_percent(with: &RunRecord, without: &RunRecord) -> Result<f64, MetricsError> {
    improvement(with.total_timely(), without.total_timely())
}

/// Percentage gain per operator; `None` where the operator's baseline is zero.
pub fn operator_improvement_percent(with: &RunRecord, without: &RunRecord) -> Vec<Option<f64>> {
    (0..with.per_client_timely.len())
        .map(|i| improvement(with.operator_timely(i), without.operator_timely(i)).ok())
        .collect()
}

/// Sum of squared delivery and sharing debts.
pub fn lyapunov_value(debts: &DebtState) -> f64 {
    let delivery: f64 = debts.delivery_debt.iter().flatten().flatten().map(|d| d * d).sum();
    let sharing: f64 = debts.sharing_debt.iter().flatten().map(|s| s * s).sum();
    delivery + sharing
}

/// Running mean of a trace: element `k` is the mean of the first `k + 1` values.
pub fn running_mean(trace: &[f64]) -> Vec<f64> {
    let mut sum = 0.0;
    trace
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            sum += x;
            sum / (k + 1) as f64
        })
        .collect()
}

/// Running maximum of a trace.
pub fn running_max(trace: &[f64]) -> Vec<f64> {
    let mut m = f64::NEG_INFINITY;
    trace
        .iter()
        .map(|&x| {
            m = m.max(x);
            m
        })
        .collect()
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut out = vec![0.0; v.len()];
        let mut start = 0;
        while start < idx.len() {
            let mut end = start;
            while end + 1 < idx.len() && v[idx[end + 1]] == v[idx[start]] {
                end += 1;
            }
            let avg = (start + end) as f64 / 2.0 + 1.0;
            for &k in &idx[start..=end] {
                out[k] = avg;
            }
            start = end + 1;
        }
        out
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
