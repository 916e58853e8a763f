//! Closed-loop simulation: arrivals, policy decision, channel outcomes and
//! debt updates, period after period.
//!
//! Channel outcomes for every client are drawn each period before the policy
//! runs, from streams separate from the arrival streams. Two runs with the
//! same seed therefore see identical arrivals and channels regardless of the
//! policy, which makes sharing/no-sharing comparisons paired.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arrivals::{make_sampler, ArrivalError, ArrivalModel, ArrivalSampler};
use crate::metrics::lyapunov_value;
use crate::model::{DebtState, Decision, ModelError, PerClient, PerRegion, PeriodState, SystemConfig};
use crate::policy::{update_debts, PolicyKind};
use crate::rng::{client_stream, domain};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Arrival(#[from] ArrivalError),
    #[error("trace output: {0}")]
    Trace(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TraceLevel {
    /// Aggregates only.
    #[default]
    None,
    /// Per-period maximum debts and Lyapunov value.
    Summary,
    /// Summary plus per-client and per-pair rows for every period.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub system: SystemConfig,
    /// Arrival model per `[operator][region]`.
    pub arrivals: PerRegion<ArrivalModel>,
    pub policy: PolicyKind,
    pub seed: u64,
    #[serde(default)]
    pub trace: TraceLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DebtSample {
    pub max_delivery_debt: f64,
    pub max_sharing_debt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientTraceRow {
    pub k: u64,
    pub operator: usize,
    pub region: usize,
    pub client: usize,
    pub arrived: u8,
    pub scheduled: u8,
    pub delivered: u8,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTraceRow {
    pub k: u64,
    pub i: usize,
    pub j: usize,
    pub sigma: f64,
    /// Slots `i` received from `j` minus slots it gave `j`, this period.
    pub net_shared: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub policy: PolicyKind,
    pub seed: u64,
    pub horizon: u64,
    /// Deliveries per period, per client.
    pub per_client_timely: PerClient<f64>,
    /// Arrivals per period, per client.
    pub per_client_arrival_rate: PerClient<f64>,
    /// `|received - given| / K` over the run, symmetric `[i][j]`.
    pub net_sharing: Vec<Vec<f64>>,
    /// Mean cross-operator slots per period, all regions together.
    pub avg_shared_per_period: f64,
    /// Debts after the last period.
    pub final_debts: DebtState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub debt_trace: Option<Vec<DebtSample>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyapunov_trace: Option<Vec<f64>>,
    #[serde(skip)]
    pub client_trace: Option<Vec<ClientTraceRow>>,
    #[serde(skip)]
    pub pair_trace: Option<Vec<PairTraceRow>>,
}

impl RunRecord {
    pub fn total_timely(&self) -> f64 {
        self.per_client_timely.iter().flatten().flatten().sum()
    }

    pub fn operator_timely(&self, operator: usize) -> f64 {
        self.per_client_timely[operator].iter().flatten().sum()
    }
}

/// What happened in one period.
#[derive(Debug, Clone)]
pub struct PeriodOutcome {
    /// 1-based period index.
    pub k: u64,
    pub state: PeriodState,
    pub decision: Decision,
    /// Debts the decision was computed from.
    pub debts: DebtState,
}

/// A run in progress. [`run`] drives it to the horizon; tests may step it
/// manually to inspect each period.
pub struct Simulation {
    cfg: SystemConfig,
    policy: PolicyKind,
    seed: u64,
    trace: TraceLevel,
    sampler: ArrivalSampler,
    channels: PerClient<ChaCha8Rng>,
    debts: DebtState,
    k: u64,
    delivered: PerClient<u64>,
    arrived: PerClient<u64>,
    /// `received[i][j]`: total slots operator `i` received from `j`.
    received: Vec<Vec<u64>>,
    cross_total: u64,
    debt_trace: Vec<DebtSample>,
    lyapunov_trace: Vec<f64>,
    client_trace: Vec<ClientTraceRow>,
    pair_trace: Vec<PairTraceRow>,
}

impl Simulation {
    pub fn new(rc: &RunConfig) -> Result<Self, SimError> {
        rc.system.validate()?;
        let cfg = rc.system.clone();
        let sampler = make_sampler(&cfg, &rc.arrivals, rc.seed)?;
        let channels = cfg
            .clients_per
            .iter()
            .enumerate()
            .map(|(operator, per_region)| {
                per_region
                    .iter()
                    .enumerate()
                    .map(|(region, &count)| {
                        (0..count)
                            .map(|client| {
                                client_stream(
                                    rc.seed,
                                    domain::DELIVERY,
                                    crate::model::ClientId {
                                        operator,
                                        region,
                                        client,
                                    },
                                )
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let n = cfg.num_operators();
        Ok(Simulation {
            debts: DebtState::zeros(&cfg),
            delivered: cfg.per_client(0),
            arrived: cfg.per_client(0),
            received: vec![vec![0; n]; n],
            cross_total: 0,
            debt_trace: Vec::new(),
            lyapunov_trace: Vec::new(),
            client_trace: Vec::new(),
            pair_trace: Vec::new(),
            policy: rc.policy,
            seed: rc.seed,
            trace: rc.trace,
            sampler,
            channels,
            cfg,
            k: 0,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn debts(&self) -> &DebtState {
        &self.debts
    }

    pub fn periods_done(&self) -> u64 {
        self.k
    }

    /// Simulates one period and returns its realization.
    pub fn step(&mut self) -> Result<PeriodOutcome, SimError> {
        self.k += 1;
        let k = self.k;
        let arrivals = self.sampler.next_period();
        // one draw per client per period, scheduled or not
        let flips: PerClient<bool> = self
            .channels
            .iter_mut()
            .zip(&self.cfg.delivery_prob)
            .map(|(rngs, probs)| {
                rngs.iter_mut()
                    .zip(probs)
                    .map(|(rngs, probs)| rngs.iter_mut().zip(probs).map(|(rng, &p)| rng.gen::<f64>() < p).collect())
                    .collect()
            })
            .collect();
        let state = PeriodState {
            arrivals: arrivals.arrivals,
            region_arrivals: arrivals.region_arrivals,
            delivery_flip: flips,
        };
        let decision = self.policy.decide(&self.cfg, &state, &self.debts)?;
        let next = update_debts(&self.cfg, &self.debts, &decision, &state);

        for id in self.cfg.clients() {
            let (i, r, n) = (id.operator, id.region, id.client);
            let arrived = state.arrivals[i][r][n];
            let scheduled = decision.schedule[i][r][n];
            let delivered = scheduled && state.delivery_flip[i][r][n];
            self.arrived[i][r][n] += u64::from(arrived);
            self.delivered[i][r][n] += u64::from(delivered);
            if self.trace == TraceLevel::Full {
                self.client_trace.push(ClientTraceRow {
                    k,
                    operator: i,
                    region: r,
                    client: n,
                    arrived: arrived.into(),
                    scheduled: scheduled.into(),
                    delivered: delivered.into(),
                    delta: self.debts.delivery_debt[i][r][n],
                });
            }
        }
        for (i, j) in self.cfg.ordered_pairs() {
            let got: u64 = (0..self.cfg.num_regions()).map(|r| u64::from(decision.share(j, i, r))).sum();
            self.received[i][j] += got;
            if self.trace == TraceLevel::Full {
                let gave: u64 = (0..self.cfg.num_regions()).map(|r| u64::from(decision.share(i, j, r))).sum();
                self.pair_trace.push(PairTraceRow {
                    k,
                    i,
                    j,
                    sigma: self.debts.sharing_debt[i][j],
                    net_shared: got as i64 - gave as i64,
                });
            }
        }
        self.cross_total += decision.total_cross_shared();

        let before = std::mem::replace(&mut self.debts, next);
        if self.trace != TraceLevel::None {
            self.debt_trace.push(DebtSample {
                max_delivery_debt: self.debts.max_delivery_debt(),
                max_sharing_debt: self.debts.max_sharing_debt(),
            });
            self.lyapunov_trace.push(lyapunov_value(&self.debts));
        }
        Ok(PeriodOutcome {
            k,
            state,
            decision,
            debts: before,
        })
    }

    /// Summarizes the periods simulated so far.
    pub fn finish(self) -> RunRecord {
        let k = self.k.max(1) as f64;
        let per_period = |v: &PerClient<u64>| -> PerClient<f64> {
            v.iter()
                .map(|pr| pr.iter().map(|c| c.iter().map(|&x| x as f64 / k).collect()).collect())
                .collect()
        };
        let n = self.cfg.num_operators();
        let net_sharing = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            0.0
                        } else {
                            self.received[i][j].abs_diff(self.received[j][i]) as f64 / k
                        }
                    })
                    .collect()
            })
            .collect();
        let full = self.trace == TraceLevel::Full;
        let summary = self.trace != TraceLevel::None;
        RunRecord {
            policy: self.policy,
            seed: self.seed,
            horizon: self.k,
            per_client_timely: per_period(&self.delivered),
            per_client_arrival_rate: per_period(&self.arrived),
            net_sharing,
            avg_shared_per_period: self.cross_total as f64 / k,
            final_debts: self.debts,
            debt_trace: summary.then_some(self.debt_trace),
            lyapunov_trace: summary.then_some(self.lyapunov_trace),
            client_trace: full.then_some(self.client_trace),
            pair_trace: full.then_some(self.pair_trace),
        }
    }
}

/// Runs the configured policy for `system.horizon` periods.
pub fn run(rc: &RunConfig) -> Result<RunRecord, SimError> {
    let mut sim = Simulation::new(rc)?;
    for _ in 0..rc.system.horizon {
        sim.step()?;
    }
    Ok(sim.finish())
}

pub fn write_client_trace<W: Write>(rows: &[ClientTraceRow], out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_pair_trace<W: Write>(rows: &[PairTraceRow], out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
