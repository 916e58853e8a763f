//! The per-period objective: expected debt-weighted deliveries (negated) plus
//! the sharing-debt cost of every slot moved between operators.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::model::{DebtState, Decision, PerClient, SystemConfig};

/// Linear coefficients of the objective for fixed debts.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveWeights {
    /// Reward for scheduling a client: delivery debt times delivery probability.
    pub client_weight: PerClient<f64>,
    /// `transfer_cost[giver][receiver]`: objective change per slot given,
    /// `sigma[receiver][giver] - sigma[giver][receiver]`. Zero on the diagonal.
    pub transfer_cost: Vec<Vec<f64>>,
}

impl ObjectiveWeights {
    pub fn new(cfg: &SystemConfig, debts: &DebtState) -> Self {
        let client_weight = debts
            .delivery_debt
            .iter()
            .zip(&cfg.delivery_prob)
            .map(|(dr, pr)| {
                dr.iter()
                    .zip(pr)
                    .map(|(d, p)| d.iter().zip(p).map(|(d, p)| d * p).collect())
                    .collect()
            })
            .collect();
        let n = cfg.num_operators();
        let sigma = &debts.sharing_debt;
        let transfer_cost = (0..n)
            .map(|giver| {
                (0..n)
                    .map(|receiver| {
                        if giver == receiver {
                            0.0
                        } else {
                            sigma[receiver][giver] - sigma[giver][receiver]
                        }
                    })
                    .collect()
            })
            .collect();
        ObjectiveWeights {
            client_weight,
            transfer_cost,
        }
    }
}

/// Objective value in floating point.
pub fn objective(cfg: &SystemConfig, debts: &DebtState, d: &Decision) -> f64 {
    let mut f = 0.0;
    for id in cfg.clients() {
        let (i, r, n) = (id.operator, id.region, id.client);
        if d.schedule[i][r][n] {
            f -= debts.delivery_debt[i][r][n] * cfg.delivery_prob[i][r][n];
        }
    }
    for (i, j) in cfg.ordered_pairs() {
        let net: i64 = (0..cfg.num_regions())
            .map(|r| i64::from(d.share(j, i, r)) - i64::from(d.share(i, j, r)))
            .sum();
        f += debts.sharing_debt[i][j] * net as f64;
    }
    f
}

pub fn to_rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite value")
}

/// Objective value in exact rational arithmetic over the (binary) inputs.
/// Independent of summation order, so two decisions can be compared exactly.
pub fn exact_objective(cfg: &SystemConfig, debts: &DebtState, d: &Decision) -> BigRational {
    let mut f = BigRational::zero();
    for id in cfg.clients() {
        let (i, r, n) = (id.operator, id.region, id.client);
        if d.schedule[i][r][n] {
            f -= to_rational(debts.delivery_debt[i][r][n]) * to_rational(cfg.delivery_prob[i][r][n]);
        }
    }
    for (i, j) in cfg.ordered_pairs() {
        let net: i64 = (0..cfg.num_regions())
            .map(|r| i64::from(d.share(j, i, r)) - i64::from(d.share(i, j, r)))
            .sum();
        if net != 0 {
            f += to_rational(debts.sharing_debt[i][j]) * BigRational::from_integer(BigInt::from(net));
        }
    }
    f
}
