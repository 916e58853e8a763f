//! Per-client packet arrival processes.
//!
//! Each client carries an independent two-state chain over "packet / no
//! packet". I.i.d. Bernoulli arrivals are the special case where the chain
//! forgets its state every period.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{count_arrivals, PerClient, PerRegion, SystemConfig};
use crate::rng::{client_stream, domain};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArrivalError {
    #[error("no arrival model for operator {operator} region {region}")]
    MissingModel { operator: usize, region: usize },
    #[error("invalid arrival model for operator {operator} region {region}: {reason}")]
    InvalidModel {
        operator: usize,
        region: usize,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalKind {
    #[default]
    Bernoulli,
    TwoStateMarkov,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalModel {
    pub kind: ArrivalKind,
    /// Mean arrivals per client per period.
    pub rate: f64,
    /// Two-state chain only: probability of staying in the current state
    /// when the rate is 1/2. In general the lag-1 autocorrelation is
    /// `2 * persistence - 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persistence: Option<f64>,
}

impl ArrivalModel {
    pub fn bernoulli(rate: f64) -> Self {
        ArrivalModel {
            kind: ArrivalKind::Bernoulli,
            rate,
            persistence: None,
        }
    }

    pub fn two_state_markov(rate: f64, persistence: f64) -> Self {
        ArrivalModel {
            kind: ArrivalKind::TwoStateMarkov,
            rate,
            persistence: Some(persistence),
        }
    }

    /// Returns `(p_on, p_off)`: the probability of moving from "no packet" to
    /// "packet", and from "packet" to "no packet".
    ///
    /// With `a + b = 2 (1 - persistence)`, `b / (a + b) = rate` the chain is
    /// stationary at `rate` and has eigenvalue `1 - a - b = 2 persistence - 1`.
    fn transitions(&self) -> Result<(f64, f64), String> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(format!("rate {} is outside [0, 1]", self.rate));
        }
        match self.kind {
            ArrivalKind::Bernoulli => {
                if self.persistence.is_some() {
                    return Err("persistence only applies to two_state_markov".into());
                }
                Ok((self.rate, 1.0 - self.rate))
            }
            ArrivalKind::TwoStateMarkov => {
                let p = self
                    .persistence
                    .ok_or_else(|| "two_state_markov requires persistence".to_string())?;
                if !(0.0..1.0).contains(&p) {
                    return Err(format!("persistence {p} is outside [0, 1)"));
                }
                let mix = 2.0 * (1.0 - p);
                let (on, off) = (mix * self.rate, mix * (1.0 - self.rate));
                if on > 1.0 || off > 1.0 {
                    return Err(format!(
                        "persistence {p} too low for rate {}: transition probability exceeds 1",
                        self.rate
                    ));
                }
                Ok((on, off))
            }
        }
    }
}

#[derive(Debug, Clone)]
struct ClientChain {
    on: bool,
    p_on: f64,
    p_off: f64,
    rng: ChaCha8Rng,
}

impl ClientChain {
    fn step(&mut self) -> bool {
        let u: f64 = self.rng.gen();
        self.on = if self.on { u >= self.p_off } else { u < self.p_on };
        self.on
    }

    // The initial draw is consumed before the first transition, so period 1
    // already has the stationary marginal.
    fn emit(&mut self) -> bool {
        let out = self.on;
        self.step();
        out
    }
}

/// Arrivals emitted for one period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arrivals {
    pub arrivals: PerClient<bool>,
    pub region_arrivals: PerRegion<u32>,
}

#[derive(Debug, Clone)]
pub struct ArrivalSampler {
    chains: PerClient<ClientChain>,
}

/// Builds one chain per client, each with its own stream derived from `seed`
/// and the client's coordinates. Chains start in their stationary
/// distribution.
pub fn make_sampler(
    cfg: &SystemConfig,
    models: &PerRegion<ArrivalModel>,
    seed: u64,
) -> Result<ArrivalSampler, ArrivalError> {
    let mut chains: PerClient<ClientChain> = Vec::with_capacity(cfg.num_operators());
    for operator in 0..cfg.num_operators() {
        let mut per_region = Vec::with_capacity(cfg.num_regions());
        for region in 0..cfg.num_regions() {
            let model = models
                .get(operator)
                .and_then(|m| m.get(region))
                .ok_or(ArrivalError::MissingModel { operator, region })?;
            let (p_on, p_off) = model.transitions().map_err(|reason| ArrivalError::InvalidModel {
                operator,
                region,
                reason,
            })?;
            let clients = (0..cfg.num_clients(operator, region))
                .map(|client| {
                    let id = crate::model::ClientId {
                        operator,
                        region,
                        client,
                    };
                    let mut rng = client_stream(seed, domain::ARRIVALS, id);
                    let on = rng.gen::<f64>() < model.rate;
                    ClientChain {
                        on,
                        p_on,
                        p_off,
                        rng,
                    }
                })
                .collect();
            per_region.push(clients);
        }
        chains.push(per_region);
    }
    Ok(ArrivalSampler { chains })
}

impl ArrivalSampler {
    /// Emits the arrivals of the next period.
    ///
    /// The first call returns the stationary initial state; every later call
    /// advances each chain by one step.
    pub fn next_period(&mut self) -> Arrivals {
        let arrivals: PerClient<bool> = self
            .chains
            .iter_mut()
            .map(|per_region| {
                per_region
                    .iter_mut()
                    .map(|clients| clients.iter_mut().map(ClientChain::emit).collect())
                    .collect()
            })
            .collect();
        let region_arrivals = count_arrivals(&arrivals);
        Arrivals {
            arrivals,
            region_arrivals,
        }
    }
}
