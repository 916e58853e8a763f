//! TOML experiment configuration.
//!
//! Sections `system`, `arrivals`, `policy`, `sweep` and `tolerances`. Keys
//! mirror the field names of the corresponding types; unknown keys are
//! rejected. Scalars are accepted wherever a per-client or per-pair table is
//! expected and broadcast to every entry.

use serde::{Deserialize, Serialize};

use super::{ExperimentError, Requirement, ScenarioBase, ScenarioSpec, Sweep};
use crate::arrivals::ArrivalKind;
use crate::metrics::Tolerances;
use crate::model::{fill_per_client, pair_matrix, PerClient, PerRegion, SystemConfig};
use crate::policy::PolicyKind;
use crate::simulator::TraceLevel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Names {
    Count(usize),
    List(Vec<String>),
}

impl Names {
    fn resolve(&self, prefix: &str) -> Vec<String> {
        match self {
            Names::Count(n) => (1..=*n).map(|k| format!("{prefix}{k}")).collect(),
            Names::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerRegionValue<T> {
    Uniform(T),
    Table(PerRegion<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerClientValue {
    Uniform(f64),
    Table(PerClient<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateFraction {
    /// Requirement as a fraction of each client's arrival rate.
    pub rate_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RequirementValue {
    Fraction(RateFraction),
    Uniform(f64),
    Table(PerClient<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairValue {
    Uniform(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub operators: Names,
    pub regions: Names,
    pub clients_per: PerRegionValue<usize>,
    pub period_length: u32,
    pub horizon: u64,
    pub delivery_prob: PerClientValue,
    pub throughput_req: RequirementValue,
    pub sharing_bound: PairValue,
    #[serde(default)]
    pub sharing_cap: Option<u32>,
}

impl Default for SystemSection {
    fn default() -> Self {
        SystemSection {
            operators: Names::Count(2),
            regions: Names::Count(2),
            clients_per: PerRegionValue::Uniform(10),
            period_length: 5,
            horizon: 10_000,
            delivery_prob: PerClientValue::Uniform(0.99),
            throughput_req: RequirementValue::Fraction(RateFraction { rate_fraction: 0.95 }),
            sharing_bound: PairValue::Uniform(0.001),
            sharing_cap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrivalsSection {
    #[serde(default)]
    pub kind: ArrivalKind,
    /// Per-client rate for each `[operator][region]`.
    pub rates: PerRegionValue<f64>,
    #[serde(default)]
    pub persistence: Option<f64>,
}

impl Default for ArrivalsSection {
    fn default() -> Self {
        ArrivalsSection {
            kind: ArrivalKind::Bernoulli,
            rates: PerRegionValue::Table(imbalance_rates(0.1, 1.0)),
            persistence: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySection {
    #[serde(default)]
    pub kind: PolicyKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub trace: TraceLevel,
    #[serde(default)]
    pub parallelism: Option<usize>,
}

fn default_replications() -> usize {
    10
}

impl Default for PolicySection {
    fn default() -> Self {
        PolicySection {
            kind: PolicyKind::Sharing,
            seed: 0,
            replications: default_replications(),
            trace: TraceLevel::None,
            parallelism: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub arrivals: ArrivalsSection,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
}

/// `[operator][region]` rates for two operators and two regions: operator 1
/// sees `low` in region 1 and `high` in region 2, operator 2 the reverse.
pub fn crossed_rates(low: f64, high: f64) -> PerRegion<f64> {
    vec![vec![low, high], vec![high, low]]
}

pub fn imbalance_rates(beta: f64, scale: f64) -> PerRegion<f64> {
    crossed_rates(scale * beta, scale * (1.0 - beta))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// Resolves defaults and broadcasts scalars into a scenario.
    pub fn resolve(&self) -> Result<ScenarioSpec, ExperimentError> {
        let s = &self.system;
        let operators = s.operators.resolve("op");
        let regions = s.regions.resolve("region");
        let (n_ops, n_regions) = (operators.len(), regions.len());
        let clients_per = match &s.clients_per {
            PerRegionValue::Uniform(n) => vec![vec![*n; n_regions]; n_ops],
            PerRegionValue::Table(t) => t.clone(),
        };
        let per_client = |v: &PerClientValue| match v {
            PerClientValue::Uniform(x) => fill_per_client(&clients_per, *x),
            PerClientValue::Table(t) => t.clone(),
        };
        let (requirement, throughput_req) = match &s.throughput_req {
            RequirementValue::Fraction(f) => {
                if !(f.rate_fraction.is_finite() && f.rate_fraction >= 0.0) {
                    return Err(ExperimentError::Config(format!(
                        "rate_fraction must be non-negative, got {}",
                        f.rate_fraction
                    )));
                }
                (Requirement::RateFraction(f.rate_fraction), fill_per_client(&clients_per, 0.0))
            }
            RequirementValue::Uniform(q) => (Requirement::Fixed, fill_per_client(&clients_per, *q)),
            RequirementValue::Table(t) => (Requirement::Fixed, t.clone()),
        };
        let sharing_bound = match &s.sharing_bound {
            PairValue::Uniform(z) => pair_matrix(n_ops, *z),
            PairValue::Matrix(m) => m.clone(),
        };
        let system = SystemConfig {
            operators,
            regions,
            delivery_prob: per_client(&s.delivery_prob),
            throughput_req,
            clients_per,
            period_length: s.period_length,
            horizon: s.horizon,
            sharing_bound,
            sharing_cap: s.sharing_cap,
        };
        system.validate()?;

        let rates = match &self.arrivals.rates {
            PerRegionValue::Uniform(x) => vec![vec![*x; n_regions]; n_ops],
            PerRegionValue::Table(t) => t.clone(),
        };
        if rates.len() != n_ops || rates.iter().any(|r| r.len() != n_regions) {
            return Err(ExperimentError::Config(format!(
                "arrivals.rates must be {n_ops}x{n_regions}"
            )));
        }
        let tolerances = self.tolerances.unwrap_or_default();
        tolerances.validate()?;
        if self.policy.replications == 0 {
            return Err(ExperimentError::Config("replications must be >= 1".into()));
        }

        let spec = ScenarioSpec {
            base: ScenarioBase {
                system,
                requirement,
                arrival_kind: self.arrivals.kind,
                persistence: self.arrivals.persistence,
                rates,
            },
            sweep: self.sweep.clone().unwrap_or(Sweep::None),
            replications: self.policy.replications,
            seed: self.policy.seed,
            policy: self.policy.kind,
            trace: self.policy.trace,
            parallelism: self.policy.parallelism,
            tolerances,
        };
        spec.points()?;
        Ok(spec)
    }
}
