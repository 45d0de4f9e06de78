//! Independent reference computations checked against the library.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_force_spibb, random_bootstrap, exact_performance, exact_values, random_counts, random_policy, simpson};
use spibb_core::bounds::{beta_pdf, interval_width, inv_reg_inc_beta, reg_inc_beta};
use spibb_core::data::{bootstrap_set, build_mle_mdp, transform_dataset, RewardModel, TransitionCounts};
use spibb_core::experiment::{aggregate, cvar, Method, RunResult, RunStatus};
use spibb_core::mdp::{greedy_policy, path_probability, performance, random_mdp, value_iteration, RandomMdpOptions};
use spibb_core::spibb::{spibb_policy, SpibbProblem};
use spibb_core::two_successor::{extend_policy, transform_mdp, SuccessorOrder};
use spibb_core::{MdpBuilder, StochasticPolicy};

fn sparse_opts(ns: usize, na: usize, gamma: f64) -> RandomMdpOptions {
    RandomMdpOptions {
        n_states: ns,
        n_actions: na,
        gamma,
        density: 0.5,
        disabled_fraction: 0.3,
    }
}

#[test]
fn policy_evaluation_matches_linear_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let ns = rng.gen_range(1..=12);
        let na = rng.gen_range(1..=4);
        let gamma = rng.gen_range(0.5..0.98);
        let m = random_mdp(&mut rng, &sparse_opts(ns, na, gamma));
        let pi = random_policy(&mut rng, &m);
        let v = value_iteration(&m, Some(&pi), 1e-11, 10_000_000).unwrap();
        let exact = exact_values(&m, &pi);
        for s in 0..ns {
            assert!((v[s] - exact[s]).abs() < 1e-9, "state {s}: {} vs {}", v[s], exact[s]);
        }
    }
}

#[test]
fn greedy_policy_beats_every_deterministic_policy() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let m = random_mdp(&mut rng, &sparse_opts(4, 3, 0.9));
        let enabled: Vec<Vec<usize>> = (0..4).map(|s| m.enabled_actions(s).collect()).collect();
        let mut best = f64::NEG_INFINITY;
        let mut idx = [0usize; 4];
        'outer: loop {
            let actions: Vec<usize> = (0..4).map(|s| enabled[s][idx[s]]).collect();
            let pi = StochasticPolicy::deterministic(3, &actions).unwrap();
            best = best.max(exact_performance(&m, &pi));
            for s in 0..4 {
                idx[s] += 1;
                if idx[s] < enabled[s].len() {
                    continue 'outer;
                }
                idx[s] = 0;
            }
            break;
        }
        let greedy = greedy_policy(&m, 1e-11).unwrap();
        assert!((exact_performance(&m, &greedy) - best).abs() < 1e-8);
    }
}

/// Four successors `0.5/0.2/0.2/0.1` of one action and a second action with
/// two successors, which must stay untouched.
#[test]
fn four_successor_transformation() {
    let mut b = MdpBuilder::new(5, 2, 0, 0.9, 1.0);
    b.row(0, 0, [(1, 0.5), (2, 0.2), (3, 0.2), (4, 0.1)]);
    b.row(0, 1, [(4, 0.8), (3, 0.2)]);
    for s in 1..5 {
        b.transition(s, 0, s, 1.0);
    }
    let m = b.build().unwrap();
    let t = transform_mdp(&m, SuccessorOrder::Ascending).unwrap();
    let m2 = t.mdp();
    let l = t.layout();
    assert_eq!(m2.n_states(), 7);
    let (x2, x3) = (l.aux_id(0, 0, 2).unwrap(), l.aux_id(0, 0, 3).unwrap());
    let tau = t.tau_action();
    let close = |a: f64, b: f64| (a - b).abs() < 1e-15;
    assert!(close(m2.prob(0, 0, 1), 0.5) && close(m2.prob(0, 0, x2), 0.5));
    assert!(close(m2.prob(x2, tau, 2), 0.4) && close(m2.prob(x2, tau, x3), 0.6));
    assert!(close(m2.prob(x3, tau, 3), 2.0 / 3.0) && close(m2.prob(x3, tau, 4), 1.0 / 3.0));
    assert_eq!(m2.successors(0, 1).unwrap(), m.successors(0, 1).unwrap());
    for (next, p) in [(1, 0.5), (2, 0.2), (3, 0.2), (4, 0.1)] {
        let q = path_probability(m2, &l.path_for(0, 0, next).unwrap()).unwrap();
        assert!((p - q).abs() < 1e-15);
    }
}

fn binomial_tail(x: f64, a: u32, b: u32) -> f64 {
    // I_x(a, b) for integer a, b is a binomial upper tail.
    let n = a + b - 1;
    let mut c = 1.0;
    let mut total = 0.0;
    for j in 0..=n {
        if j > 0 {
            c = c * (n - j + 1) as f64 / j as f64;
        }
        if j >= a {
            total += c * x.powi(j as i32) * (1.0 - x).powi((n - j) as i32);
        }
    }
    total
}

#[test]
fn incomplete_beta_matches_quadrature_and_binomial_sum() {
    let quad = simpson(&|t| beta_pdf(t, 4.0, 6.0), 0.0, 0.3, 1e-14);
    let lib = reg_inc_beta(0.3, 4.0, 6.0).unwrap();
    assert!((quad - lib).abs() < 1e-10, "{quad} vs {lib}");
    for &(a, b) in &[(1, 1), (2, 5), (7, 3), (20, 20), (50, 3)] {
        for i in 1..20 {
            let x = i as f64 / 20.0;
            let exact = binomial_tail(x, a, b);
            let got = reg_inc_beta(x, a as f64, b as f64).unwrap();
            assert!((exact - got).abs() < 1e-12, "I_{x}({a},{b}): {exact} vs {got}");
        }
    }
}

#[test]
fn inverse_round_trip_on_grid() {
    for &a in &[0.5, 1.0, 2.5, 10.0, 100.0, 3000.0] {
        for &b in &[0.5, 1.0, 4.0, 30.0, 700.0] {
            for &p in &[1e-8, 1e-4, 0.01, 0.2, 0.5, 0.77, 0.999] {
                let x = inv_reg_inc_beta(p, a, b).unwrap();
                let back = reg_inc_beta(x, a, b).unwrap();
                assert!((back - p).abs() <= 1e-10, "p {p} a {a} b {b}: {back}");
            }
        }
    }
}

#[test]
fn interval_width_has_closed_form_at_n_zero() {
    // Under the uniform prior with n = 0 the posterior is Beta(1, 1).
    for &dt in &[0.01, 0.1, 0.5] {
        assert!((interval_width(0, dt, None).unwrap() - (1.0 - dt)).abs() < 1e-12);
    }
}

#[test]
fn spibb_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..40 {
        let m = random_mdp(&mut rng, &sparse_opts(4, 3, 0.9));
        let pi_b = random_policy(&mut rng, &m);
        let u = random_bootstrap(&mut rng, 4, 3, 0.4);
        let pi = spibb_policy(&SpibbProblem::new(&m, &pi_b, &u)).unwrap();
        let got = exact_performance(&m, &pi);
        let best = brute_force_spibb(&m, &pi_b, &u);
        assert!((got - best).abs() < 1e-8, "{got} vs {best}");
    }
}

#[test]
fn cvar_equals_mean_of_sorted_prefix() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for n in [1usize, 7, 10, 99, 100, 1000] {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut sorted = v.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for alpha in [0.01, 0.1, 0.5, 1.0] {
            let k = ((alpha * n as f64).ceil() as usize).max(1);
            let expect = sorted[..k].iter().sum::<f64>() / k as f64;
            assert!((cvar(&v, alpha).unwrap() - expect).abs() < 1e-12);
        }
    }
}

#[test]
fn aggregate_recomputes_from_raw_runs() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut results = Vec::new();
    for size in [10, 100] {
        for run in 0..50 {
            let failed = run % 17 == 3;
            results.push(RunResult {
                method: Method::Spibb,
                n_wedge: Some(5),
                dataset_size: size,
                run,
                seed: run as u64,
                status: if failed { RunStatus::Failed("x".into()) } else { RunStatus::Ok },
                perf: if failed { f64::NAN } else { rng.gen_range(0.0..1.0) },
            });
        }
    }
    let rows = aggregate("gridworld", &results);
    assert_eq!(rows.len(), 2);
    for row in rows {
        let vals: Vec<f64> = results
            .iter()
            .filter(|r| r.dataset_size == row.dataset_size && r.status == RunStatus::Ok)
            .map(|r| r.perf)
            .collect();
        assert_eq!(row.n_runs, vals.len());
        assert!((row.mean - vals.iter().sum::<f64>() / vals.len() as f64).abs() < 1e-12);
        let mut sorted = vals.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let k = (0.1 * vals.len() as f64).ceil() as usize;
        assert!((row.cvar10 - sorted[..k].iter().sum::<f64>() / k as f64).abs() < 1e-12);
        assert!((row.cvar1 - sorted[0]).abs() < 1e-12);
    }
}

#[test]
fn dataset_transform_tallies() {
    let mut c = TransitionCounts::new(5, 1);
    c.add(0, 0, 1, 5, 2.5);
    c.add(0, 0, 2, 2, 1.0);
    c.add(0, 0, 3, 2, 1.0);
    c.add(0, 0, 4, 1, 0.5);
    c.add(1, 0, 2, 3, 0.0);
    let t = transform_dataset(&c, SuccessorOrder::Ascending);
    let (l, tc) = (t.layout(), t.counts());
    let (x2, x3) = (l.aux_id(0, 0, 2).unwrap(), l.aux_id(0, 0, 3).unwrap());
    assert_eq!(tc.triple(0, 0, 1), 5);
    assert_eq!(tc.triple(0, 0, x2), 5);
    assert_eq!(tc.pair(0, 0), 10);
    assert_eq!(tc.triple(x2, 1, 2), 2);
    assert_eq!(tc.triple(x2, 1, x3), 3);
    assert_eq!(tc.triple(x3, 1, 3), 2);
    assert_eq!(tc.triple(x3, 1, 4), 1);
    assert_eq!(tc.triple(1, 0, 2), 3);
    assert_eq!(tc.reward_sum(0, 0), 5.0);
    // Aux pairs are always bootstrapped; main pairs by count.
    let u = t.bootstrap_set(4);
    assert!(u.contains(x2, 1) && u.contains(x3, 1) && u.contains(1, 0) && !u.contains(0, 0));
}

#[test]
fn mle_rows_are_empirical_frequencies() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let m = random_mdp(&mut rng, &sparse_opts(6, 3, 0.9));
    let c = random_counts(&mut rng, &m, 20);
    let mle = build_mle_mdp(&c, &m, RewardModel::Known).unwrap();
    for s in 0..6 {
        for a in m.enabled_actions(s) {
            let n = c.pair(s, a);
            for t in 0..6 {
                let expect = if n == 0 {
                    if t == s { 1.0 } else { 0.0 }
                } else {
                    c.triple(s, a, t) as f64 / n as f64
                };
                assert!((mle.prob(s, a, t) - expect).abs() < 1e-15);
            }
            assert_eq!(mle.reward(s, a), if n == 0 { 0.0 } else { m.reward(s, a) });
        }
    }
}

#[test]
fn transformed_mle_performance_matches_exact_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let m = random_mdp(&mut rng, &RandomMdpOptions::dense(6, 3, 0.9));
        let pi = random_policy(&mut rng, &m);
        let t = transform_mdp(&m, SuccessorOrder::Descending).unwrap();
        let pi2 = extend_policy(&pi, &t).unwrap();
        let a = exact_performance(&m, &pi);
        let b = exact_performance(t.mdp(), &pi2);
        assert!((a - b).abs() < 1e-10);
        assert!((performance(t.mdp(), &pi2).unwrap() - b).abs() < 1e-8);
    }
    let m = random_mdp(&mut rng, &RandomMdpOptions::dense(6, 3, 0.9));
    let c = random_counts(&mut rng, &m, 9);
    assert!(bootstrap_set(&c, 0).iter().all(|(s, a)| c.pair(s, a) == 0));
}
