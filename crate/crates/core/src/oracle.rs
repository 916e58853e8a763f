//! Exhaustive minimizer of the per-period objective for small instances.
//!
//! Enumerates every integer share matrix satisfying the slot constraints in
//! each region, every admissible schedule for it, and the cross product over
//! regions, comparing objective values in exact rational arithmetic. Used as
//! ground truth for the policy solver; it shares no code with it beyond the
//! model types.

use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::model::{DebtState, Decision, ModelError, PeriodState, SystemConfig};
use crate::policy::objective::to_rational;

pub const DEFAULT_BUDGET: u128 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("instance too large for enumeration: {estimate} candidates exceed budget {budget}")]
    InstanceTooLarge { estimate: u128, budget: u128 },
}

/// Which schedules are enumerated for a fixed share matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleSearch {
    /// For each count `m` up to the available slots, only the `m` arrived
    /// clients with the largest debt-weighted reward.
    TopM,
    /// Every subset of arrived clients that fits in the available slots.
    AllSubsets,
}

#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    pub restrict_no_sharing: bool,
    pub schedules: ScheduleSearch,
    pub budget: u128,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            restrict_no_sharing: false,
            schedules: ScheduleSearch::TopM,
            budget: DEFAULT_BUDGET,
        }
    }
}

pub fn brute_force_optimum(
    cfg: &SystemConfig,
    state: &PeriodState,
    debts: &DebtState,
    restrict_no_sharing: bool,
) -> Result<(Decision, BigRational), OracleError> {
    brute_force_with(
        cfg,
        state,
        debts,
        OracleOptions {
            restrict_no_sharing,
            ..OracleOptions::default()
        },
    )
}

/// One feasible assignment for a single region.
#[derive(Clone)]
struct RegionCandidate {
    /// `share[giver][receiver]`
    share: Vec<Vec<u32>>,
    /// Scheduled client indices per operator.
    schedule: Vec<Vec<usize>>,
    value: BigRational,
}

struct RegionLimits {
    own_max: Vec<u32>,
    give_max: Vec<u32>,
    recv_max: Vec<u32>,
}

fn limits(cfg: &SystemConfig, state: &PeriodState, r: usize, no_sharing: bool) -> RegionLimits {
    let t = cfg.period_length;
    let cap = cfg.sharing_cap.unwrap_or(u32::MAX);
    let n = cfg.num_operators();
    let a = |i: usize| state.region_arrivals[i][r];
    RegionLimits {
        own_max: (0..n).map(|i| a(i).min(t)).collect(),
        give_max: (0..n)
            .map(|i| if no_sharing { 0 } else { t.saturating_sub(a(i)).min(cap) })
            .collect(),
        recv_max: (0..n)
            .map(|i| if no_sharing { 0 } else { a(i).saturating_sub(t).min(cap) })
            .collect(),
    }
}

fn schedule_options(arrived: u32, search: ScheduleSearch) -> u128 {
    match search {
        ScheduleSearch::TopM => u128::from(arrived) + 1,
        ScheduleSearch::AllSubsets => 1u128.checked_shl(arrived).unwrap_or(u128::MAX),
    }
}

/// Upper bound on the number of joint candidates.
fn estimate(cfg: &SystemConfig, state: &PeriodState, opts: &OracleOptions) -> u128 {
    let n = cfg.num_operators();
    let mut total: u128 = 1;
    for r in 0..cfg.num_regions() {
        let lim = limits(cfg, state, r, opts.restrict_no_sharing);
        let mut region: u128 = 1;
        for i in 0..n {
            region = region.saturating_mul(u128::from(lim.own_max[i]) + 1);
            region = region.saturating_mul(schedule_options(state.region_arrivals[i][r], opts.schedules));
            for j in (0..n).filter(|&j| j != i) {
                region = region.saturating_mul(u128::from(lim.give_max[j].min(lim.recv_max[i])) + 1);
            }
        }
        total = total.saturating_mul(region);
    }
    total
}

pub fn brute_force_with(
    cfg: &SystemConfig,
    state: &PeriodState,
    debts: &DebtState,
    opts: OracleOptions,
) -> Result<(Decision, BigRational), OracleError> {
    state.check_shape(cfg)?;
    debts.check_shape(cfg)?;
    let est = estimate(cfg, state, &opts);
    if est > opts.budget {
        return Err(OracleError::InstanceTooLarge {
            estimate: est,
            budget: opts.budget,
        });
    }

    let per_region: Vec<Vec<RegionCandidate>> = (0..cfg.num_regions())
        .map(|r| region_candidates(cfg, state, debts, r, &opts))
        .collect();

    // Odometer over the cross product of regional candidates; first strict
    // minimum in lexicographic order wins.
    let mut idx = vec![0usize; per_region.len()];
    let mut best: Option<(Vec<usize>, BigRational)> = None;
    loop {
        let mut value = BigRational::zero();
        for (r, &k) in idx.iter().enumerate() {
            value += &per_region[r][k].value;
        }
        if best.as_ref().is_none_or(|(_, b)| value < *b) {
            best = Some((idx.clone(), value));
        }
        let mut pos = per_region.len();
        loop {
            if pos == 0 {
                let (choice, value) = best.expect("at least the empty decision is feasible");
                return Ok((assemble(cfg, &per_region, &choice), value));
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < per_region[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

fn assemble(cfg: &SystemConfig, per_region: &[Vec<RegionCandidate>], choice: &[usize]) -> Decision {
    let mut d = Decision::zeros(cfg);
    for (r, &k) in choice.iter().enumerate() {
        let c = &per_region[r][k];
        d.share[r] = c.share.clone();
        for (i, clients) in c.schedule.iter().enumerate() {
            for &n in clients {
                d.schedule[i][r][n] = true;
            }
        }
    }
    d
}

fn region_candidates(
    cfg: &SystemConfig,
    state: &PeriodState,
    debts: &DebtState,
    r: usize,
    opts: &OracleOptions,
) -> Vec<RegionCandidate> {
    let n = cfg.num_operators();
    let t = cfg.period_length;
    let lim = limits(cfg, state, r, opts.restrict_no_sharing);

    let weight = |i: usize, c: usize| to_rational(debts.delivery_debt[i][r][c]) * to_rational(cfg.delivery_prob[i][r][c]);
    let pair_cost = |giver: usize, receiver: usize| {
        to_rational(debts.sharing_debt[receiver][giver]) - to_rational(debts.sharing_debt[giver][receiver])
    };

    // Arrived clients per operator, ranked by exact weight (desc) then index.
    let ranked: Vec<Vec<(usize, BigRational)>> = (0..n)
        .map(|i| {
            let mut v: Vec<(usize, BigRational)> = state.arrivals[i][r]
                .iter()
                .enumerate()
                .filter(|(_, &a)| a)
                .map(|(c, _)| (c, weight(i, c)))
                .collect();
            v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            v
        })
        .collect();

    // Variables in lexicographic order: own use for each operator, then each
    // ordered pair (giver, receiver) with giver != receiver.
    let mut vars: Vec<(usize, usize, u32)> = (0..n).map(|i| (i, i, lim.own_max[i])).collect();
    for j in 0..n {
        for i in (0..n).filter(|&i| i != j) {
            vars.push((j, i, lim.give_max[j].min(lim.recv_max[i])));
        }
    }

    let mut out = Vec::new();
    let mut values = vec![0usize; vars.len()];
    loop {
        let mut share = vec![vec![0u32; n]; n];
        for (&(j, i, _), &v) in vars.iter().zip(&values) {
            share[j][i] = v as u32;
        }
        if feasible_share(&share, &lim, t) {
            let mut transfer = BigRational::zero();
            for j in 0..n {
                for i in (0..n).filter(|&i| i != j) {
                    if share[j][i] > 0 {
                        transfer += pair_cost(j, i) * BigRational::from_integer(share[j][i].into());
                    }
                }
            }
            let slots: Vec<u32> = (0..n).map(|i| (0..n).map(|j| share[j][i]).sum()).collect();
            let options: Vec<Vec<(Vec<usize>, BigRational)>> = (0..n)
                .map(|i| schedules_for(&ranked[i], slots[i] as usize, opts.schedules))
                .collect();
            let mut pick = vec![0usize; n];
            loop {
                let mut value = transfer.clone();
                for i in 0..n {
                    value -= &options[i][pick[i]].1;
                }
                out.push(RegionCandidate {
                    share: share.clone(),
                    schedule: (0..n).map(|i| options[i][pick[i]].0.clone()).collect(),
                    value,
                });
                if !advance(&mut pick, |i| options[i].len()) {
                    break;
                }
            }
        }
        if !advance(&mut values, |k| vars[k].2 as usize + 1) {
            break;
        }
    }
    out
}

/// Increments a mixed-radix counter (last position fastest); false on wrap.
fn advance(digits: &mut [usize], radix: impl Fn(usize) -> usize) -> bool {
    for pos in (0..digits.len()).rev() {
        digits[pos] += 1;
        if digits[pos] < radix(pos) {
            return true;
        }
        digits[pos] = 0;
    }
    false
}

fn feasible_share(share: &[Vec<u32>], lim: &RegionLimits, t: u32) -> bool {
    let n = share.len();
    (0..n).all(|j| {
        let given: u32 = (0..n).filter(|&i| i != j).map(|i| share[j][i]).sum();
        let received: u32 = (0..n).filter(|&i| i != j).map(|i| share[i][j]).sum();
        share[j][j] <= lim.own_max[j]
            && share[j][j] + given <= t
            && given <= lim.give_max[j]
            && received <= lim.recv_max[j]
    })
}

fn schedules_for(
    ranked: &[(usize, BigRational)],
    slots: usize,
    search: ScheduleSearch,
) -> Vec<(Vec<usize>, BigRational)> {
    match search {
        ScheduleSearch::TopM => (0..=slots.min(ranked.len()))
            .map(|m| {
                let chosen = &ranked[..m];
                let total = chosen.iter().fold(BigRational::zero(), |acc, (_, w)| acc + w);
                (chosen.iter().map(|(c, _)| *c).collect(), total)
            })
            .collect(),
        ScheduleSearch::AllSubsets => {
            let k = ranked.len();
            (0u64..(1u64 << k))
                .filter(|mask| mask.count_ones() as usize <= slots)
                .map(|mask| {
                    let chosen: Vec<&(usize, BigRational)> =
                        (0..k).filter(|b| mask >> b & 1 == 1).map(|b| &ranked[b]).collect();
                    let total = chosen.iter().fold(BigRational::zero(), |acc, (_, w)| acc + w);
                    let mut clients: Vec<usize> = chosen.iter().map(|(c, _)| *c).collect();
                    clients.sort_unstable();
                    (clients, total)
                })
                .collect()
        }
    }
}
