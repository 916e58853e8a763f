mod common;

use bwshare::model::{validate_decision, Decision};
use bwshare::oracle::{brute_force_optimum, brute_force_with, OracleOptions, ScheduleSearch};
use bwshare::policy::{exact_objective, solve_period, solve_period_no_sharing};
use common::{random_instance, rng, Instance};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[test]
fn solver_matches_oracle_exactly() {
    let mut rng = rng(11);
    for n in 0..1500 {
        let Instance { cfg, state, debts } = random_instance(&mut rng, false);
        let d = solve_period(&cfg, &state, &debts).unwrap();
        assert!(validate_decision(&cfg, &state, &d).unwrap().is_empty());
        let (_, best) = brute_force_optimum(&cfg, &state, &debts, false).unwrap();
        assert_eq!(exact_objective(&cfg, &debts, &d), best, "instance {n}");
    }
}

#[test]
fn solver_matches_oracle_under_caps() {
    let mut rng = rng(12);
    for n in 0..500 {
        let Instance { cfg, state, debts } = random_instance(&mut rng, true);
        let d = solve_period(&cfg, &state, &debts).unwrap();
        assert!(validate_decision(&cfg, &state, &d).unwrap().is_empty());
        let (_, best) = brute_force_optimum(&cfg, &state, &debts, false).unwrap();
        assert_eq!(exact_objective(&cfg, &debts, &d), best, "instance {n}");
    }
}

#[test]
fn no_sharing_matches_restricted_oracle() {
    let mut rng = rng(13);
    for n in 0..500 {
        let Instance { cfg, state, debts } = random_instance(&mut rng, false);
        let d = solve_period_no_sharing(&cfg, &state, &debts).unwrap();
        assert_eq!(d.total_cross_shared(), 0);
        let (od, best) = brute_force_optimum(&cfg, &state, &debts, true).unwrap();
        assert_eq!(od.total_cross_shared(), 0);
        assert_eq!(exact_objective(&cfg, &debts, &d), best, "instance {n}");
        // sharing can only help
        let (_, shared) = brute_force_optimum(&cfg, &state, &debts, false).unwrap();
        assert!(shared <= best);
    }
}

#[test]
fn top_m_schedules_lose_nothing() {
    let mut rng = rng(14);
    let all = OracleOptions {
        schedules: ScheduleSearch::AllSubsets,
        ..OracleOptions::default()
    };
    for _ in 0..200 {
        let Instance { cfg, state, debts } = random_instance(&mut rng, true);
        let (_, top) = brute_force_with(&cfg, &state, &debts, OracleOptions::default()).unwrap();
        let (_, full) = brute_force_with(&cfg, &state, &debts, all).unwrap();
        assert_eq!(top, full);
    }
}

/// A random decision satisfying every constraint.
fn random_feasible(inst: &Instance, rng: &mut ChaCha8Rng) -> Decision {
    let Instance { cfg, state, .. } = inst;
    let t = cfg.period_length;
    let n_ops = cfg.num_operators();
    let mut d = Decision::zeros(cfg);
    for r in 0..cfg.num_regions() {
        let a: Vec<u32> = (0..n_ops).map(|i| state.region_arrivals[i][r]).collect();
        let mut give_left: Vec<u32> = a.iter().map(|&x| t.saturating_sub(x)).collect();
        let mut recv_left: Vec<u32> = a.iter().map(|&x| x.saturating_sub(t)).collect();
        let mut cap_give = vec![cfg.sharing_cap.unwrap_or(u32::MAX); n_ops];
        let mut cap_recv = cap_give.clone();
        for i in 0..n_ops {
            d.share[r][i][i] = rng.gen_range(0..=a[i].min(t));
        }
        for g in 0..n_ops {
            for rc in 0..n_ops {
                if g == rc {
                    continue;
                }
                let max = give_left[g]
                    .min(recv_left[rc])
                    .min(cap_give[g])
                    .min(cap_recv[rc])
                    .min(t - d.share[r][g][g]);
                let x = rng.gen_range(0..=max);
                d.share[r][g][rc] = x;
                give_left[g] -= x;
                recv_left[rc] -= x;
                cap_give[g] -= x;
                cap_recv[rc] -= x;
            }
        }
        for i in 0..n_ops {
            let mut arrived: Vec<usize> = (0..cfg.num_clients(i, r)).filter(|&n| state.arrivals[i][r][n]).collect();
            arrived.shuffle(rng);
            let slots = d.slots_available(i, r) as usize;
            let m = rng.gen_range(0..=slots.min(arrived.len()));
            for &n in &arrived[..m] {
                d.schedule[i][r][n] = true;
            }
        }
    }
    d
}

#[test]
fn oracle_beats_random_feasible_decisions() {
    let mut rng = rng(15);
    for _ in 0..300 {
        let inst = random_instance(&mut rng, true);
        let (_, best) = brute_force_optimum(&inst.cfg, &inst.state, &inst.debts, false).unwrap();
        for _ in 0..20 {
            let d = random_feasible(&inst, &mut rng);
            assert!(validate_decision(&inst.cfg, &inst.state, &d).unwrap().is_empty());
            assert!(exact_objective(&inst.cfg, &inst.debts, &d) >= best);
        }
    }
}

#[test]
fn regions_decompose() {
    // the joint optimum over two regions is the sum of the single-region optima
    let mut rng = rng(16);
    let mut checked = 0;
    while checked < 200 {
        let inst = random_instance(&mut rng, true);
        if inst.cfg.num_regions() != 2 {
            continue;
        }
        checked += 1;
        let (_, joint) = brute_force_optimum(&inst.cfg, &inst.state, &inst.debts, false).unwrap();
        let mut sum = num_rational::BigRational::from_integer(0.into());
        for r in 0..2 {
            let mut cfg = inst.cfg.clone();
            let pick = |v: &Vec<Vec<Vec<f64>>>| v.iter().map(|pr| vec![pr[r].clone()]).collect::<Vec<_>>();
            cfg.delivery_prob = pick(&inst.cfg.delivery_prob);
            cfg.throughput_req = pick(&inst.cfg.throughput_req);
            cfg.clients_per = inst.cfg.clients_per.iter().map(|pr| vec![pr[r]]).collect();
            cfg.regions = vec![inst.cfg.regions[r].clone()];
            let arrivals = inst.state.arrivals.iter().map(|pr| vec![pr[r].clone()]).collect();
            let flips = inst.state.delivery_flip.iter().map(|pr| vec![pr[r].clone()]).collect();
            let state = bwshare::model::PeriodState::new(arrivals, flips);
            let mut debts = inst.debts.clone();
            debts.delivery_debt = pick(&inst.debts.delivery_debt);
            let (_, v) = brute_force_optimum(&cfg, &state, &debts, false).unwrap();
            sum += v;
        }
        assert_eq!(joint, sum);
    }
}

#[test]
fn more_receiving_debt_never_means_more_receiving() {
    let mut rng = rng(17);
    for _ in 0..500 {
        let mut inst = random_instance(&mut rng, false);
        let i = rng.gen_range(0..2);
        let j = 1 - i;
        let received = |inst: &Instance| {
            let d = solve_period(&inst.cfg, &inst.state, &inst.debts).unwrap();
            (0..inst.cfg.num_regions()).map(|r| d.share(j, i, r)).sum::<u32>()
        };
        let before = received(&inst);
        inst.debts.sharing_debt[i][j] += rng.gen_range(0.0..3.0);
        assert!(received(&inst) <= before);
    }
}
