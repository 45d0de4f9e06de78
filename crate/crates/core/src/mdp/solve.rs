use std::ops::Index;

use super::TabularMdp;
use crate::error::{Error, Result};
use crate::policy::StochasticPolicy;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// State values `V(s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueFunction {
    values: Vec<f64>,
}

impl ValueFunction {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl Index<usize> for ValueFunction {
    type Output = f64;

    fn index(&self, s: usize) -> &f64 {
        &self.values[s]
    }
}

fn backup_action(mdp: &TabularMdp, v: &[f64], s: usize, a: usize) -> f64 {
    let row = mdp.successors(s, a).expect("backup on disabled action");
    let expected: f64 = row.iter().map(|&(t, p)| p * v[t]).sum();
    mdp.reward(s, a) + mdp.discount(s) * expected
}

fn backup(mdp: &TabularMdp, policy: Option<&StochasticPolicy>, v: &[f64], s: usize) -> f64 {
    match policy {
        Some(pi) => pi
            .row(s)
            .iter()
            .enumerate()
            .filter(|&(_, &p)| p > 0.0)
            .map(|(a, &p)| p * backup_action(mdp, v, s, a))
            .sum(),
        None => mdp
            .enabled_actions(s)
            .map(|a| backup_action(mdp, v, s, a))
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Value iteration with state-dependent discounting.
///
/// Evaluates `policy` when given, otherwise computes optimal values. Stops once
/// the sup-norm change of one synchronous backup is at most
/// `tol * (1 - γ_min) / γ_min`.
pub fn value_iteration(
    mdp: &TabularMdp,
    policy: Option<&StochasticPolicy>,
    tol: f64,
    max_iter: usize,
) -> Result<ValueFunction> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance {tol} must be positive")));
    }
    if let Some(pi) = policy {
        pi.validate_for(mdp)?;
    }
    let g = mdp.min_discount();
    let threshold = tol * (1.0 - g) / g;

    let n = mdp.n_states();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        residual = 0.0;
        for s in 0..n {
            next[s] = backup(mdp, policy, &v, s);
            residual = f64::max(residual, (next[s] - v[s]).abs());
        }
        std::mem::swap(&mut v, &mut next);
        if residual <= threshold {
            return Ok(ValueFunction { values: v });
        }
    }
    Err(Error::NonConvergence { max_iter, residual })
}

/// `Q(s, a) = R(s, a) + γ(s) Σ P(s'|s,a) V(s')`, row-major; `-inf` for
/// disabled pairs.
pub fn q_values(mdp: &TabularMdp, v: &ValueFunction) -> Vec<f64> {
    let na = mdp.n_actions();
    let mut q = vec![f64::NEG_INFINITY; mdp.n_states() * na];
    for s in 0..mdp.n_states() {
        for a in mdp.enabled_actions(s) {
            q[s * na + a] = backup_action(mdp, v.values(), s, a);
        }
    }
    q
}

/// `ρ(π, M) = V^π(ι)` with the default tolerance.
pub fn performance(mdp: &TabularMdp, policy: &StochasticPolicy) -> Result<f64> {
    performance_with(mdp, policy, DEFAULT_TOL)
}

pub fn performance_with(mdp: &TabularMdp, policy: &StochasticPolicy, tol: f64) -> Result<f64> {
    let v = value_iteration(mdp, Some(policy), tol, DEFAULT_MAX_ITER)?;
    Ok(v[mdp.initial_state()])
}

/// Index of the largest value among `candidates`, ties to the lowest index.
pub(crate) fn argmax_lowest<I>(candidates: I, q: impl Fn(usize) -> f64) -> Option<usize>
where
    I: IntoIterator<Item = usize>,
{
    let mut best: Option<(usize, f64)> = None;
    for a in candidates {
        let value = q(a);
        match best {
            Some((_, b)) if value <= b => {}
            _ => best = Some((a, value)),
        }
    }
    best.map(|(a, _)| a)
}

/// Deterministic policy greedy with respect to `v`, ties to the lowest action.
pub fn greedy_from_values(mdp: &TabularMdp, v: &ValueFunction) -> StochasticPolicy {
    let q = q_values(mdp, v);
    let na = mdp.n_actions();
    let actions: Vec<usize> = (0..mdp.n_states())
        .map(|s| argmax_lowest(mdp.enabled_actions(s), |a| q[s * na + a]).unwrap())
        .collect();
    StochasticPolicy::deterministic(na, &actions).unwrap()
}

/// Optimal deterministic policy from value iteration.
pub fn greedy_policy(mdp: &TabularMdp, tol: f64) -> Result<StochasticPolicy> {
    let v = value_iteration(mdp, None, tol, DEFAULT_MAX_ITER)?;
    Ok(greedy_from_values(mdp, &v))
}

/// Probability of an alternating `s, a, s, a, ..., s` path: the product of its
/// transition probabilities (zero for impossible steps).
pub fn path_probability(mdp: &TabularMdp, path: &[usize]) -> Result<f64> {
    if path.len().is_multiple_of(2) {
        return Err(Error::MalformedPath(format!(
            "path must alternate states and actions and end in a state; got {} elements",
            path.len()
        )));
    }
    for (i, &x) in path.iter().enumerate() {
        let bound = if i % 2 == 0 { mdp.n_states() } else { mdp.n_actions() };
        if x >= bound {
            return Err(Error::MalformedPath(format!("element {i} = {x} out of range")));
        }
    }
    Ok(path
        .windows(3)
        .step_by(2)
        .map(|w| mdp.prob(w[0], w[1], w[2]))
        .product())
}
