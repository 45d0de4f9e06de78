//! Policy improvement constrained to follow the behavior policy on the
//! bootstrap set, and the unconstrained baseline.

use crate::data::BootstrapSet;
use crate::error::{Error, Result};
use crate::mdp::{
    argmax_lowest, greedy_policy, q_values, value_iteration, TabularMdp, DEFAULT_MAX_ITER,
    DEFAULT_TOL,
};
use crate::policy::StochasticPolicy;

/// Cap on policy-iteration sweeps.
pub const MAX_SWEEPS: usize = 10_000;

/// Default evaluation tolerance. The returned policy is within about
/// `3 · tol / (1 - γ)` of the best constrained policy.
pub const SPIBB_TOL: f64 = 1e-10;

pub struct SpibbProblem<'a> {
    pub mle: &'a TabularMdp,
    pub pi_b: &'a StochasticPolicy,
    pub u: &'a BootstrapSet,
    /// Policy-evaluation tolerance; also the minimum Q gain needed to switch action.
    pub tol: f64,
}

impl<'a> SpibbProblem<'a> {
    pub fn new(mle: &'a TabularMdp, pi_b: &'a StochasticPolicy, u: &'a BootstrapSet) -> Self {
        Self {
            mle,
            pi_b,
            u,
            tol: SPIBB_TOL,
        }
    }

    fn validate(&self) -> Result<()> {
        self.pi_b.validate_for(self.mle)?;
        if self.u.n_states() != self.mle.n_states() || self.u.n_actions() != self.mle.n_actions() {
            return Err(Error::DimensionMismatch("bootstrap set does not match the MDP".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Per state: the policy row with the free mass placed on `choice`.
fn constrained_row(problem: &SpibbProblem, s: usize, choice: Option<usize>, row: &mut [f64]) {
    let pb = problem.pi_b.row(s);
    let Some(best) = choice else {
        row.copy_from_slice(pb);
        return;
    };
    let mut free = 0.0;
    for a in 0..row.len() {
        if problem.u.contains(s, a) {
            row[a] = pb[a];
        } else {
            free += pb[a];
            row[a] = 0.0;
        }
    }
    // Summation can overshoot one by an ulp when every action is free.
    row[best] = free.min(1.0);
}

/// Policy iteration over `Π_b`: on bootstrapped pairs the policy equals
/// `π_b`, and the remaining behavior mass of each state goes to a single
/// non-bootstrapped action chosen greedily (ties to the lowest index).
pub fn spibb_policy(problem: &SpibbProblem) -> Result<StochasticPolicy> {
    problem.validate()?;
    let mdp = problem.mle;
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let free_actions: Vec<Vec<usize>> = (0..ns)
        .map(|s| mdp.enabled_actions(s).filter(|&a| !problem.u.contains(s, a)).collect())
        .collect();

    let mut choice: Vec<Option<usize>> = vec![None; ns];
    let mut pi = problem.pi_b.clone();
    for sweep in 0.. {
        if sweep == MAX_SWEEPS {
            return Err(Error::PolicyIterationLimit(MAX_SWEEPS));
        }
        let v = value_iteration(mdp, Some(&pi), problem.tol, DEFAULT_MAX_ITER)?;
        let q = q_values(mdp, &v);
        let mut changed = false;
        for s in 0..ns {
            let Some(best) = argmax_lowest(free_actions[s].iter().copied(), |a| q[s * na + a])
            else {
                continue;
            };
            let switch = match choice[s] {
                None => true,
                Some(cur) => q[s * na + best] > q[s * na + cur] + problem.tol,
            };
            if switch && choice[s] != Some(best) {
                choice[s] = Some(best);
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for (s, &c) in choice.iter().enumerate() {
            constrained_row(problem, s, c, pi.row_mut(s));
        }
    }
    Ok(pi)
}

/// Greedy policy of the MLE-MDP, with no safety constraint.
pub fn basic_rl_policy(mle: &TabularMdp) -> Result<StochasticPolicy> {
    greedy_policy(mle, DEFAULT_TOL)
}
