//! Domain types shared by every other module: the static system description,
//! one period's realized randomness, the virtual-queue debts and the
//! per-period scheduling/sharing decision.
//!
//! Operators, regions and clients are dense 0-based indices. Per-client data
//! is stored as `[operator][region][client]` nested vectors, per-operator-pair
//! data as `[i][j]` square matrices with an unused diagonal, and slot shares
//! as `[region][giver][receiver]`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Per-client storage, indexed `[operator][region][client]`.
pub type PerClient<T> = Vec<Vec<Vec<T>>>;

/// Per-(operator, region) storage, indexed `[operator][region]`.
pub type PerRegion<T> = Vec<Vec<T>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClientId {
    pub operator: usize,
    pub region: usize,
    pub client: usize,
}

impl fmt::Display for ClientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(op {}, region {}, client {})", self.operator, self.region, self.client)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid system configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: String,
        found: String,
    },
}

fn shape_err(what: &'static str, expected: impl fmt::Display, found: impl fmt::Display) -> ModelError {
    ModelError::ShapeMismatch {
        what,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

/// Static description of a multi-operator, multi-region system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub operators: Vec<String>,
    pub regions: Vec<String>,
    /// Number of clients of each operator in each region, `[operator][region]`.
    pub clients_per: PerRegion<usize>,
    /// Timeslots per period.
    pub period_length: u32,
    /// Number of periods to simulate.
    pub horizon: u64,
    pub delivery_prob: PerClient<f64>,
    /// Required timely throughput, packets per period.
    pub throughput_req: PerClient<f64>,
    /// Allowed long-run sharing imbalance per operator pair, symmetric `[i][j]`.
    pub sharing_bound: Vec<Vec<f64>>,
    /// Optional cap on cross-operator slots given or received per region and period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sharing_cap: Option<u32>,
}

impl SystemConfig {
    /// Homogeneous system: every client has the same delivery probability and
    /// requirement, every pair the same sharing bound.
    #[allow(clippy::too_many_arguments)]
    pub fn uniform(
        operators: usize,
        regions: usize,
        clients: usize,
        period_length: u32,
        horizon: u64,
        delivery_prob: f64,
        throughput_req: f64,
        sharing_bound: f64,
    ) -> Result<Self, ModelError> {
        let clients_per = vec![vec![clients; regions]; operators];
        let cfg = SystemConfig {
            operators: (1..=operators).map(|i| format!("op{i}")).collect(),
            regions: (1..=regions).map(|r| format!("region{r}")).collect(),
            delivery_prob: fill_per_client(&clients_per, delivery_prob),
            throughput_req: fill_per_client(&clients_per, throughput_req),
            clients_per,
            period_length,
            horizon,
            sharing_bound: pair_matrix(operators, sharing_bound),
            sharing_cap: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn num_operators(&self) -> usize {
        self.operators.len()
    }

    pub fn num_regions(&self) -> usize {
        self.regions.len()
    }

    pub fn num_clients(&self, operator: usize, region: usize) -> usize {
        self.clients_per[operator][region]
    }

    pub fn total_clients(&self) -> usize {
        self.clients_per.iter().flatten().sum()
    }

    /// All clients in `(operator, region, client)` lexicographic order.
    pub fn clients(&self) -> impl Iterator<Item = ClientId> + '_ {
        self.clients_per.iter().enumerate().flat_map(|(operator, per_region)| {
            per_region.iter().enumerate().flat_map(move |(region, &count)| {
                (0..count).map(move |client| ClientId {
                    operator,
                    region,
                    client,
                })
            })
        })
    }

    /// A per-client map with every entry set to `value`.
    pub fn per_client<T: Clone>(&self, value: T) -> PerClient<T> {
        fill_per_client(&self.clients_per, value)
    }

    /// Ordered operator pairs `(i, j)` with `i != j`.
    pub fn ordered_pairs(&self) -> impl Iterator<Item = (usize, usize)> {
        let n = self.num_operators();
        (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let ops = self.num_operators();
        let regions = self.num_regions();
        if ops == 0 {
            return Err(ModelError::InvalidConfig("at least one operator is required".into()));
        }
        if regions == 0 {
            return Err(ModelError::InvalidConfig("at least one region is required".into()));
        }
        if self.period_length == 0 {
            return Err(ModelError::InvalidConfig("period_length must be >= 1".into()));
        }
        if self.horizon == 0 {
            return Err(ModelError::InvalidConfig("horizon must be >= 1".into()));
        }
        if self.clients_per.len() != ops || self.clients_per.iter().any(|v| v.len() != regions) {
            return Err(shape_err(
                "clients_per",
                format!("{ops}x{regions}"),
                describe_shape2(&self.clients_per),
            ));
        }
        check_per_client_shape("delivery_prob", &self.clients_per, &self.delivery_prob)?;
        check_per_client_shape("throughput_req", &self.clients_per, &self.throughput_req)?;
        for id in self.clients() {
            let p = self.delivery_prob[id.operator][id.region][id.client];
            if !(0.0..=1.0).contains(&p) {
                return Err(ModelError::InvalidConfig(format!(
                    "delivery_prob {p} for client {id} is outside [0, 1]"
                )));
            }
            let q = self.throughput_req[id.operator][id.region][id.client];
            if !(q.is_finite() && q >= 0.0) {
                return Err(ModelError::InvalidConfig(format!(
                    "throughput_req {q} for client {id} must be finite and non-negative"
                )));
            }
        }
        if self.sharing_bound.len() != ops || self.sharing_bound.iter().any(|row| row.len() != ops) {
            return Err(shape_err(
                "sharing_bound",
                format!("{ops}x{ops}"),
                describe_shape2(&self.sharing_bound),
            ));
        }
        for (i, j) in self.ordered_pairs() {
            let z = self.sharing_bound[i][j];
            if !(z.is_finite() && z >= 0.0) {
                return Err(ModelError::InvalidConfig(format!(
                    "sharing_bound between operators {i} and {j} must be finite and non-negative, got {z}"
                )));
            }
            if z != self.sharing_bound[j][i] {
                return Err(ModelError::InvalidConfig(format!(
                    "sharing_bound must be symmetric: [{i}][{j}] = {z} but [{j}][{i}] = {}",
                    self.sharing_bound[j][i]
                )));
            }
        }
        Ok(())
    }
}

/// Square operator-pair matrix with `value` off the diagonal and zero on it.
pub fn pair_matrix(operators: usize, value: f64) -> Vec<Vec<f64>> {
    (0..operators)
        .map(|i| (0..operators).map(|j| if i == j { 0.0 } else { value }).collect())
        .collect()
}

pub fn fill_per_client<T: Clone>(clients_per: &PerRegion<usize>, value: T) -> PerClient<T> {
    clients_per
        .iter()
        .map(|per_region| per_region.iter().map(|&n| vec![value.clone(); n]).collect())
        .collect()
}

fn describe_shape2<T>(v: &[Vec<T>]) -> String {
    let inner: Vec<String> = v.iter().map(|row| row.len().to_string()).collect();
    format!("{} rows of lengths [{}]", v.len(), inner.join(", "))
}

fn check_per_client_shape<T>(
    what: &'static str,
    clients_per: &PerRegion<usize>,
    values: &PerClient<T>,
) -> Result<(), ModelError> {
    let ok = values.len() == clients_per.len()
        && values.iter().zip(clients_per).all(|(per_region, counts)| {
            per_region.len() == counts.len()
                && per_region.iter().zip(counts).all(|(clients, &n)| clients.len() == n)
        });
    if ok {
        Ok(())
    } else {
        Err(shape_err(what, format!("{clients_per:?} clients"), "different layout"))
    }
}

/// Realized randomness for one period: who has a packet, and whether a
/// transmission to each client would succeed. The delivery flips are drawn
/// before the policy runs; the policy never reads them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodState {
    pub arrivals: PerClient<bool>,
    pub region_arrivals: PerRegion<u32>,
    pub delivery_flip: PerClient<bool>,
}

impl PeriodState {
    pub fn new(arrivals: PerClient<bool>, delivery_flip: PerClient<bool>) -> Self {
        let region_arrivals = count_arrivals(&arrivals);
        PeriodState {
            arrivals,
            region_arrivals,
            delivery_flip,
        }
    }

    pub fn check_shape(&self, cfg: &SystemConfig) -> Result<(), ModelError> {
        check_per_client_shape("arrivals", &cfg.clients_per, &self.arrivals)?;
        check_per_client_shape("delivery_flip", &cfg.clients_per, &self.delivery_flip)?;
        if count_arrivals(&self.arrivals) != self.region_arrivals {
            return Err(shape_err(
                "region_arrivals",
                "per-region sums of arrivals",
                format!("{:?}", self.region_arrivals),
            ));
        }
        Ok(())
    }

    pub fn arrived(&self, id: ClientId) -> bool {
        self.arrivals[id.operator][id.region][id.client]
    }
}

pub fn count_arrivals(arrivals: &PerClient<bool>) -> PerRegion<u32> {
    arrivals
        .iter()
        .map(|per_region| {
            per_region
                .iter()
                .map(|clients| clients.iter().filter(|&&a| a).count() as u32)
                .collect()
        })
        .collect()
}

/// Virtual-queue debts: delivery debt per client and sharing debt per ordered
/// operator pair (`sharing_debt[i][j]` is what operator `i` owes `j`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebtState {
    pub delivery_debt: PerClient<f64>,
    pub sharing_debt: Vec<Vec<f64>>,
}

impl DebtState {
    pub fn zeros(cfg: &SystemConfig) -> Self {
        DebtState {
            delivery_debt: cfg.per_client(0.0),
            sharing_debt: pair_matrix(cfg.num_operators(), 0.0),
        }
    }

    pub fn check_shape(&self, cfg: &SystemConfig) -> Result<(), ModelError> {
        check_per_client_shape("delivery_debt", &cfg.clients_per, &self.delivery_debt)?;
        let n = cfg.num_operators();
        if self.sharing_debt.len() != n || self.sharing_debt.iter().any(|row| row.len() != n) {
            return Err(shape_err(
                "sharing_debt",
                format!("{n}x{n}"),
                describe_shape2(&self.sharing_debt),
            ));
        }
        Ok(())
    }

    pub fn max_delivery_debt(&self) -> f64 {
        self.delivery_debt
            .iter()
            .flatten()
            .flatten()
            .copied()
            .fold(0.0, f64::max)
    }

    pub fn max_sharing_debt(&self) -> f64 {
        self.sharing_debt.iter().flatten().copied().fold(0.0, f64::max)
    }
}

/// Scheduling indicators and slot shares for one period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub schedule: PerClient<bool>,
    /// `share[region][giver][receiver]`; the diagonal is own use.
    pub share: Vec<Vec<Vec<u32>>>,
}

impl Decision {
    pub fn zeros(cfg: &SystemConfig) -> Self {
        let n = cfg.num_operators();
        Decision {
            schedule: cfg.per_client(false),
            share: vec![vec![vec![0; n]; n]; cfg.num_regions()],
        }
    }

    pub fn share(&self, giver: usize, receiver: usize, region: usize) -> u32 {
        self.share[region][giver][receiver]
    }

    /// Slots available to `operator` in `region`, own use included.
    pub fn slots_available(&self, operator: usize, region: usize) -> u32 {
        self.share[region].iter().map(|row| row[operator]).sum()
    }

    pub fn cross_given(&self, giver: usize, region: usize) -> u32 {
        self.share[region][giver]
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != giver)
            .map(|(_, &s)| s)
            .sum()
    }

    pub fn cross_received(&self, receiver: usize, region: usize) -> u32 {
        self.share[region]
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != receiver)
            .map(|(_, row)| row[receiver])
            .sum()
    }

    /// Total cross-operator slots over all regions.
    pub fn total_cross_shared(&self) -> u64 {
        self.share
            .iter()
            .map(|m| {
                m.iter()
                    .enumerate()
                    .flat_map(|(j, row)| row.iter().enumerate().filter(move |&(i, _)| i != j))
                    .map(|(_, &s)| u64::from(s))
                    .sum::<u64>()
            })
            .sum()
    }

    pub fn scheduled_count(&self, operator: usize, region: usize) -> u32 {
        self.schedule[operator][region].iter().filter(|&&b| b).count() as u32
    }

    pub fn check_shape(&self, cfg: &SystemConfig) -> Result<(), ModelError> {
        check_per_client_shape("schedule", &cfg.clients_per, &self.schedule)?;
        let n = cfg.num_operators();
        let ok = self.share.len() == cfg.num_regions()
            && self
                .share
                .iter()
                .all(|m| m.len() == n && m.iter().all(|row| row.len() == n));
        if !ok {
            return Err(shape_err(
                "share",
                format!("{} regions of {n}x{n}", cfg.num_regions()),
                format!("{} regions", self.share.len()),
            ));
        }
        Ok(())
    }
}

/// The per-period feasibility constraints a decision must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    /// A client without a packet was scheduled.
    ScheduleWithoutArrival,
    /// Scheduled clients exceed own plus received slots.
    ScheduledExceedsSlots,
    /// Own use plus slots given away exceeds the period length.
    SlotBudget,
    /// Own use exceeds the operator's arrivals in the region.
    OwnUseExceedsArrivals,
    /// Cross-operator slots given exceed `max(T - A, 0)`.
    GiveLimit,
    /// Cross-operator slots received exceed `max(A - T, 0)`.
    ReceiveLimit,
    /// Cross-operator slots given exceed the sharing cap.
    GiveCap,
    /// Cross-operator slots received exceed the sharing cap.
    ReceiveCap,
}

impl Constraint {
    pub fn describe(self) -> &'static str {
        match self {
            Constraint::ScheduleWithoutArrival => "schedule <= arrival",
            Constraint::ScheduledExceedsSlots => "scheduled <= own + received slots",
            Constraint::SlotBudget => "own use + given <= T",
            Constraint::OwnUseExceedsArrivals => "own use <= region arrivals",
            Constraint::GiveLimit => "given <= max(T - A, 0)",
            Constraint::ReceiveLimit => "received <= max(A - T, 0)",
            Constraint::GiveCap => "given <= sharing cap",
            Constraint::ReceiveCap => "received <= sharing cap",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: Constraint,
    pub operator: usize,
    pub region: usize,
    pub client: Option<usize>,
    pub lhs: u64,
    pub rhs: u64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} violated for operator {} region {}",
            self.constraint.describe(),
            self.operator,
            self.region
        )?;
        if let Some(c) = self.client {
            write!(f, " client {c}")?;
        }
        write!(f, ": {} > {}", self.lhs, self.rhs)
    }
}

/// Checks every per-period constraint. Returns one violation per failed
/// inequality (empty when the decision is feasible), or a shape error when
/// the decision does not match the configuration.
pub fn validate_decision(
    cfg: &SystemConfig,
    state: &PeriodState,
    d: &Decision,
) -> Result<Vec<Violation>, ModelError> {
    state.check_shape(cfg)?;
    d.check_shape(cfg)?;

    let t = u64::from(cfg.period_length);
    let mut out = Vec::new();
    let mut push = |constraint, operator, region, client, lhs: u64, rhs: u64| {
        if lhs > rhs {
            out.push(Violation {
                constraint,
                operator,
                region,
                client,
                lhs,
                rhs,
            });
        }
    };

    for r in 0..cfg.num_regions() {
        for i in 0..cfg.num_operators() {
            for (n, (&b, &a)) in d.schedule[i][r].iter().zip(&state.arrivals[i][r]).enumerate() {
                push(Constraint::ScheduleWithoutArrival, i, r, Some(n), u64::from(b), u64::from(a));
            }
            let arrivals = u64::from(state.region_arrivals[i][r]);
            let own = u64::from(d.share(i, i, r));
            let given = u64::from(d.cross_given(i, r));
            let received = u64::from(d.cross_received(i, r));

            push(
                Constraint::ScheduledExceedsSlots,
                i,
                r,
                None,
                u64::from(d.scheduled_count(i, r)),
                u64::from(d.slots_available(i, r)),
            );
            push(Constraint::SlotBudget, i, r, None, own + given, t);
            push(Constraint::OwnUseExceedsArrivals, i, r, None, own, arrivals);
            push(Constraint::GiveLimit, i, r, None, given, t.saturating_sub(arrivals));
            push(Constraint::ReceiveLimit, i, r, None, received, arrivals.saturating_sub(t));
            if let Some(cap) = cfg.sharing_cap {
                push(Constraint::GiveCap, i, r, None, given, u64::from(cap));
                push(Constraint::ReceiveCap, i, r, None, received, u64::from(cap));
            }
        }
    }
    Ok(out)
}
