#![allow(dead_code)]

use bwshare::model::{count_arrivals, DebtState, PeriodState, SystemConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub cfg: SystemConfig,
    pub state: PeriodState,
    pub debts: DebtState,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two operators, up to two regions, up to four clients per operator and
/// region, `T <= 3`, debts in [0, 5], delivery probabilities in [0.5, 1].
pub fn random_instance(rng: &mut ChaCha8Rng, with_cap: bool) -> Instance {
    let regions = rng.gen_range(1..=2);
    let t = rng.gen_range(1..=3);
    let mut cfg = SystemConfig::uniform(2, regions, 1, t, 1, 0.9, 0.1, 0.001).unwrap();
    cfg.clients_per = (0..2).map(|_| (0..regions).map(|_| rng.gen_range(1..=4)).collect()).collect();
    let mut per_client = |lo: f64, hi: f64| -> Vec<Vec<Vec<f64>>> {
        cfg.clients_per
            .iter()
            .map(|pr| pr.iter().map(|&n| (0..n).map(|_| rng.gen_range(lo..=hi)).collect()).collect())
            .collect()
    };
    let p = per_client(0.5, 1.0);
    let q = per_client(0.0, 0.5);
    let delta = per_client(0.0, 5.0);
    cfg.delivery_prob = p;
    cfg.throughput_req = q;
    if with_cap && rng.gen_bool(0.5) {
        cfg.sharing_cap = Some(rng.gen_range(0..=2));
    }
    cfg.validate().unwrap();
    let arrivals: Vec<Vec<Vec<bool>>> = cfg
        .clients_per
        .iter()
        .map(|pr| pr.iter().map(|&n| (0..n).map(|_| rng.gen_bool(0.6)).collect()).collect())
        .collect();
    let flips = cfg.per_client(true);
    let state = PeriodState::new(arrivals, flips);
    assert_eq!(state.region_arrivals, count_arrivals(&state.arrivals));
    let mut debts = DebtState::zeros(&cfg);
    debts.delivery_debt = delta;
    for i in 0..2 {
        for j in 0..2 {
            if i != j {
                debts.sharing_debt[i][j] = rng.gen_range(0.0..=5.0);
            }
        }
    }
    Instance { cfg, state, debts }
}
