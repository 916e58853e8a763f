//! Online sharing-and-scheduling policy.
//!
//! Every period the policy minimizes the debt-weighted objective
//! ([`objective::objective`]) over all feasible integer decisions, then the
//! debts are advanced with the realized deliveries and the slots moved.
//!
//! The objective and constraints separate by region once debts are fixed.
//! Within a region each operator's own slots (`min(A, T)`) carry no cost and
//! are filled with its best arrived clients; the remaining question is how
//! many slots flow from operators with spare capacity to operators with
//! excess arrivals, which [`flow::TransferProblem`] answers exactly.

mod flow;
pub mod objective;

use serde::{Deserialize, Serialize};

use crate::model::{Decision, DebtState, ModelError, PeriodState, SystemConfig};
use flow::TransferProblem;
pub use objective::{exact_objective, objective, ObjectiveWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    #[default]
    Sharing,
    NoSharing,
}

impl PolicyKind {
    pub fn decide(
        self,
        cfg: &SystemConfig,
        state: &PeriodState,
        debts: &DebtState,
    ) -> Result<Decision, ModelError> {
        match self {
            PolicyKind::Sharing => solve_period(cfg, state, debts),
            PolicyKind::NoSharing => solve_period_no_sharing(cfg, state, debts),
        }
    }
}

/// Arrived clients of one operator in one region, best first: weight
/// descending, then client index ascending.
pub(crate) fn rank_arrived(weights: &[f64], arrivals: &[bool]) -> Vec<usize> {
    let mut ranked: Vec<usize> = (0..arrivals.len()).filter(|&n| arrivals[n]).collect();
    ranked.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    ranked
}

fn check_inputs(cfg: &SystemConfig, state: &PeriodState, debts: &DebtState) -> Result<(), ModelError> {
    state.check_shape(cfg)?;
    debts.check_shape(cfg)
}

/// Exact minimizer of the per-period objective.
pub fn solve_period(
    cfg: &SystemConfig,
    state: &PeriodState,
    debts: &DebtState,
) -> Result<Decision, ModelError> {
    check_inputs(cfg, state, debts)?;
    Ok(solve(cfg, state, debts, true))
}

/// Largest-debt-first scheduling on own slots only.
pub fn solve_period_no_sharing(
    cfg: &SystemConfig,
    state: &PeriodState,
    debts: &DebtState,
) -> Result<Decision, ModelError> {
    check_inputs(cfg, state, debts)?;
    Ok(solve(cfg, state, debts, false))
}

fn solve(cfg: &SystemConfig, state: &PeriodState, debts: &DebtState, sharing: bool) -> Decision {
    let weights = ObjectiveWeights::new(cfg, debts);
    let t = cfg.period_length;
    let n_ops = cfg.num_operators();
    let mut d = Decision::zeros(cfg);

    for r in 0..cfg.num_regions() {
        let ranked: Vec<Vec<usize>> = (0..n_ops)
            .map(|i| rank_arrived(&weights.client_weight[i][r], &state.arrivals[i][r]))
            .collect();

        let received = if sharing {
            let mut problem = TransferProblem {
                givers: Vec::new(),
                receivers: Vec::new(),
                cost: weights.transfer_cost.clone(),
            };
            for i in 0..n_ops {
                let a = state.region_arrivals[i][r];
                if a < t {
                    problem.givers.push((i, t - a));
                } else if a > t {
                    let gains = ranked[i][t as usize..]
                        .iter()
                        .map(|&n| weights.client_weight[i][r][n])
                        .collect();
                    problem.receivers.push((i, gains));
                }
            }
            let flow = problem.solve(cfg.sharing_cap);
            for (j, row) in flow.iter().enumerate() {
                for (i, &s) in row.iter().enumerate() {
                    d.share[r][j][i] = s;
                }
            }
            (0..n_ops).map(|i| d.cross_received(i, r)).collect()
        } else {
            vec![0; n_ops]
        };

        for i in 0..n_ops {
            let own = state.region_arrivals[i][r].min(t);
            d.share[r][i][i] = own;
            let slots = (own + received[i]) as usize;
            for &n in ranked[i].iter().take(slots) {
                d.schedule[i][r][n] = true;
            }
        }
    }
    d
}

/// Advances both debt families by one period. Delivery debt grows by the
/// requirement and shrinks by one for each realized delivery; sharing debt
/// `i -> j` grows by the net slots `i` received from `j` minus the allowed
/// imbalance. Both clamp at zero.
pub fn update_debts(cfg: &SystemConfig, debts: &DebtState, d: &Decision, state: &PeriodState) -> DebtState {
    let mut next = debts.clone();
    for id in cfg.clients() {
        let (i, r, n) = (id.operator, id.region, id.client);
        let delivered = d.schedule[i][r][n] && state.delivery_flip[i][r][n];
        let v = debts.delivery_debt[i][r][n] + cfg.throughput_req[i][r][n] - if delivered { 1.0 } else { 0.0 };
        next.delivery_debt[i][r][n] = v.max(0.0);
    }
    for (i, j) in cfg.ordered_pairs() {
        let net: i64 = (0..cfg.num_regions())
            .map(|r| i64::from(d.share(j, i, r)) - i64::from(d.share(i, j, r)))
            .sum();
        let v = debts.sharing_debt[i][j] + net as f64 - cfg.sharing_bound[i][j];
        next.sharing_debt[i][j] = v.max(0.0);
    }
    next
}
