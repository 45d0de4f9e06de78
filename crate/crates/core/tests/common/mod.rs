#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use spibb_core::data::{BootstrapSet, TransitionCounts};
use spibb_core::{StochasticPolicy, TabularMdp};

/// Exact policy values from `(I - Γ P_π) V = r_π`.
pub fn exact_values(m: &TabularMdp, pi: &StochasticPolicy) -> Vec<f64> {
    let n = m.n_states();
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut r = DVector::<f64>::zeros(n);
    for s in 0..n {
        for act in m.enabled_actions(s) {
            let p = pi.prob(s, act);
            if p == 0.0 {
                continue;
            }
            r[s] += p * m.reward(s, act);
            for &(t, q) in m.successors(s, act).unwrap() {
                a[(s, t)] -= m.discount(s) * p * q;
            }
        }
    }
    a.lu().solve(&r).expect("policy evaluation system is nonsingular").iter().copied().collect()
}

pub fn exact_performance(m: &TabularMdp, pi: &StochasticPolicy) -> f64 {
    exact_values(m, pi)[m.initial_state()]
}

/// Random full-support policy over the enabled actions.
pub fn random_policy<R: Rng>(rng: &mut R, m: &TabularMdp) -> StochasticPolicy {
    let na = m.n_actions();
    let mut probs = vec![0.0; m.n_states() * na];
    for s in 0..m.n_states() {
        let enabled: Vec<usize> = m.enabled_actions(s).collect();
        let w: Vec<f64> = enabled.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = w.iter().sum();
        for (&a, wi) in enabled.iter().zip(&w) {
            probs[s * na + a] = wi / total;
        }
        // Put the rounding remainder on the first action so rows sum to one.
        let sum: f64 = probs[s * na..(s + 1) * na].iter().sum();
        probs[s * na + enabled[0]] += 1.0 - sum;
    }
    StochasticPolicy::new(m.n_states(), na, probs).unwrap()
}

/// Random counts over every enabled pair of `m`'s shape, with up to
/// `max_count` observations per successor and some pairs left unvisited.
pub fn random_counts<R: Rng>(rng: &mut R, m: &TabularMdp, max_count: u64) -> TransitionCounts {
    let mut c = TransitionCounts::new(m.n_states(), m.n_actions());
    for s in 0..m.n_states() {
        for a in m.enabled_actions(s) {
            if rng.gen_bool(0.1) {
                continue;
            }
            for t in 0..m.n_states() {
                if rng.gen_bool(0.6) {
                    c.add(s, a, t, rng.gen_range(1..=max_count), 0.0);
                }
            }
        }
    }
    c
}

/// Best constrained performance by enumerating one free action per state.
pub fn brute_force_spibb(m: &TabularMdp, pi_b: &StochasticPolicy, u: &BootstrapSet) -> f64 {
    let na = m.n_actions();
    let free: Vec<Vec<usize>> = (0..m.n_states())
        .map(|s| m.enabled_actions(s).filter(|&a| !u.contains(s, a)).collect())
        .collect();
    let mut idx = vec![0usize; m.n_states()];
    let mut best = f64::NEG_INFINITY;
    loop {
        let mut probs = vec![0.0; m.n_states() * na];
        for s in 0..m.n_states() {
            let row = pi_b.row(s);
            if free[s].is_empty() {
                probs[s * na..(s + 1) * na].copy_from_slice(row);
                continue;
            }
            let mut mass = 0.0;
            for a in 0..na {
                if u.contains(s, a) {
                    probs[s * na + a] = row[a];
                } else {
                    mass += row[a];
                }
            }
            probs[s * na + free[s][idx[s]]] = mass.min(1.0);
        }
        let pi = StochasticPolicy::new(m.n_states(), na, probs).unwrap();
        best = best.max(exact_performance(m, &pi));
        // Odometer over the free-action choices.
        let mut s = 0;
        loop {
            if s == m.n_states() {
                return best;
            }
            if free[s].is_empty() {
                s += 1;
                continue;
            }
            idx[s] += 1;
            if idx[s] < free[s].len() {
                break;
            }
            idx[s] = 0;
            s += 1;
        }
    }
}

/// Least-squares fit `y = a + b x`; returns the coefficient of determination.
pub fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

/// Adaptive Simpson integration of `f` over `[a, b]`.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, eps, 50)
}

pub fn random_bootstrap<R: Rng>(rng: &mut R, ns: usize, na: usize, p: f64) -> BootstrapSet {
    let mask: Vec<bool> = (0..ns * na).map(|_| rng.gen_bool(p)).collect();
    BootstrapSet::from_fn(ns, na, |s, a| mask[s * na + a])
}
