//! Finite MDPs with sparse successor rows and state-dependent discounting.

mod random;
mod solve;
mod text;

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub use random::{random_mdp, RandomMdpOptions};
pub(crate) use solve::argmax_lowest;
pub use solve::{
    greedy_from_values, greedy_policy, path_probability, performance, performance_with, q_values,
    value_iteration, ValueFunction, DEFAULT_MAX_ITER, DEFAULT_TOL,
};

/// Maximum allowed deviation of a transition row sum from one.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// A tabular MDP `(S, A, ι, P, R, γ)` with a partial transition function.
///
/// Row `(s, a)` is `None` when action `a` is disabled in `s`. Present rows hold
/// `(successor, probability)` pairs sorted by successor index, all with
/// probability in `(0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    initial_state: usize,
    rows: Vec<Option<Vec<(usize, f64)>>>,
    rewards: Vec<f64>,
    r_max: f64,
    discount: Vec<f64>,
    default_discount: f64,
}

impl TabularMdp {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn default_discount(&self) -> f64 {
        self.default_discount
    }

    pub fn discount(&self, s: usize) -> f64 {
        self.discount[s]
    }

    pub fn has_uniform_discount(&self) -> bool {
        self.discount.iter().all(|&g| g == self.default_discount)
    }

    /// Smallest discount strictly below one; this drives the stopping rule of
    /// value iteration.
    pub fn min_discount(&self) -> f64 {
        self.discount
            .iter()
            .copied()
            .filter(|&g| g < 1.0)
            .fold(self.default_discount, f64::min)
    }

    /// Value bound `Rmax / (1 - γ)` for the default discount.
    pub fn default_v_max(&self) -> f64 {
        self.r_max / (1.0 - self.default_discount)
    }

    pub fn successors(&self, s: usize, a: usize) -> Option<&[(usize, f64)]> {
        self.rows[s * self.n_actions + a].as_deref()
    }

    pub fn is_enabled(&self, s: usize, a: usize) -> bool {
        self.rows[s * self.n_actions + a].is_some()
    }

    pub fn enabled_actions(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_actions).filter(move |&a| self.is_enabled(s, a))
    }

    /// Reward `R(s, a)`; zero for disabled pairs.
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }

    /// `P(next | s, a)`, zero when the action is disabled or `next` unreachable.
    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        match self.successors(s, a) {
            Some(row) => row
                .binary_search_by_key(&next, |&(t, _)| t)
                .map(|i| row[i].1)
                .unwrap_or(0.0),
            None => 0.0,
        }
    }

    /// True when every enabled action of `s` loops back to `s` with probability one.
    pub fn is_absorbing(&self, s: usize) -> bool {
        self.enabled_actions(s).all(|a| {
            let row = self.successors(s, a).unwrap();
            row.len() == 1 && row[0].0 == s
        })
    }

    /// Largest `|Post(s, a)|` over all enabled pairs.
    pub fn max_branching(&self) -> usize {
        self.rows
            .iter()
            .flatten()
            .map(|row| row.len())
            .max()
            .unwrap_or(0)
    }

    /// Builder pre-filled with the same shape (states, actions, initial state,
    /// discounts, reward bound) but no transitions or rewards.
    pub fn shape_builder(&self) -> MdpBuilder {
        let mut b = MdpBuilder::new(
            self.n_states,
            self.n_actions,
            self.initial_state,
            self.default_discount,
            self.r_max,
        );
        for (s, &g) in self.discount.iter().enumerate() {
            if g != self.default_discount {
                b.discount(s, g);
            }
        }
        b
    }
}

/// Incremental constructor for [`TabularMdp`]; everything is validated in
/// [`MdpBuilder::build`].
#[derive(Clone, Debug)]
pub struct MdpBuilder {
    n_states: usize,
    n_actions: usize,
    initial_state: usize,
    default_discount: f64,
    r_max: f64,
    transitions: BTreeMap<(usize, usize), BTreeMap<usize, f64>>,
    rewards: BTreeMap<(usize, usize), f64>,
    discounts: BTreeMap<usize, f64>,
}

impl MdpBuilder {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        initial_state: usize,
        gamma: f64,
        r_max: f64,
    ) -> Self {
        Self {
            n_states,
            n_actions,
            initial_state,
            default_discount: gamma,
            r_max,
            transitions: BTreeMap::new(),
            rewards: BTreeMap::new(),
            discounts: BTreeMap::new(),
        }
    }

    /// Adds probability mass to `P(next | s, a)`. Repeated entries accumulate.
    pub fn transition(&mut self, s: usize, a: usize, next: usize, p: f64) -> &mut Self {
        *self
            .transitions
            .entry((s, a))
            .or_default()
            .entry(next)
            .or_insert(0.0) += p;
        self
    }

    /// Replaces the whole row of `(s, a)`.
    pub fn row<I>(&mut self, s: usize, a: usize, row: I) -> &mut Self
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut entries = BTreeMap::new();
        for (next, p) in row {
            *entries.entry(next).or_insert(0.0) += p;
        }
        self.transitions.insert((s, a), entries);
        self
    }

    pub fn reward(&mut self, s: usize, a: usize, r: f64) -> &mut Self {
        self.rewards.insert((s, a), r);
        self
    }

    pub fn discount(&mut self, s: usize, gamma: f64) -> &mut Self {
        self.discounts.insert(s, gamma);
        self
    }

    pub fn build(self) -> Result<TabularMdp> {
        let MdpBuilder {
            n_states,
            n_actions,
            initial_state,
            default_discount,
            r_max,
            transitions,
            rewards,
            discounts,
        } = self;

        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidInput("need at least one state and one action".into()));
        }
        if initial_state >= n_states {
            return Err(Error::InvalidInput(format!(
                "initial state {initial_state} out of range (n_states = {n_states})"
            )));
        }
        if !(default_discount > 0.0 && default_discount < 1.0) {
            return Err(Error::InvalidDiscount(format!(
                "default discount {default_discount} not in (0, 1)"
            )));
        }
        if !(r_max >= 0.0 && r_max.is_finite()) {
            return Err(Error::InvalidInput(format!("r_max {r_max} must be finite and >= 0")));
        }

        let mut rows: Vec<Option<Vec<(usize, f64)>>> = vec![None; n_states * n_actions];
        for ((s, a), entries) in transitions {
            if s >= n_states || a >= n_actions {
                return Err(Error::InvalidInput(format!("pair ({s}, {a}) out of range")));
            }
            let mut row = Vec::with_capacity(entries.len());
            let mut sum = 0.0;
            for (next, p) in entries {
                if next >= n_states {
                    return Err(Error::InvalidInput(format!(
                        "successor {next} of ({s}, {a}) out of range"
                    )));
                }
                if !(0.0..=1.0).contains(&p) || p.is_nan() {
                    return Err(Error::InvalidInput(format!(
                        "P({next} | {s}, {a}) = {p} not in [0, 1]"
                    )));
                }
                if p > 0.0 {
                    row.push((next, p));
                    sum += p;
                }
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidInput(format!(
                    "row ({s}, {a}) sums to {sum}, not 1"
                )));
            }
            rows[s * n_actions + a] = Some(row);
        }

        for s in 0..n_states {
            if (0..n_actions).all(|a| rows[s * n_actions + a].is_none()) {
                return Err(Error::InvalidInput(format!("state {s} has no enabled action")));
            }
        }

        let mut reward_table = vec![0.0; n_states * n_actions];
        for ((s, a), r) in rewards {
            if s >= n_states || a >= n_actions || rows[s * n_actions + a].is_none() {
                return Err(Error::InvalidInput(format!(
                    "reward given for disabled or out-of-range pair ({s}, {a})"
                )));
            }
            if !r.is_finite() || r.abs() > r_max * (1.0 + 1e-12) {
                return Err(Error::InvalidInput(format!(
                    "|R({s}, {a})| = {} exceeds r_max = {r_max}",
                    r.abs()
                )));
            }
            reward_table[s * n_actions + a] = r;
        }

        let mut discount = vec![default_discount; n_states];
        for (s, g) in discounts {
            if s >= n_states {
                return Err(Error::InvalidInput(format!("discount for state {s} out of range")));
            }
            if !(g > 0.0 && g <= 1.0) {
                return Err(Error::InvalidDiscount(format!("discount {g} of state {s} not in (0, 1]")));
            }
            discount[s] = g;
        }

        let mdp = TabularMdp {
            n_states,
            n_actions,
            initial_state,
            rows,
            rewards: reward_table,
            r_max,
            discount,
            default_discount,
        };
        check_undiscounted_cycles(&mdp)?;
        Ok(mdp)
    }
}

/// Rejects cycles made only of states with discount one; value iteration
/// would not contract on them.
fn check_undiscounted_cycles(mdp: &TabularMdp) -> Result<()> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Done,
    }
    let undiscounted = |s: usize| mdp.discount(s) >= 1.0;
    let mut mark = vec![Mark::New; mdp.n_states()];

    for root in (0..mdp.n_states()).filter(|&s| undiscounted(s)) {
        if mark[root] != Mark::New {
            continue;
        }
        // iterative DFS over the subgraph of undiscounted states
        let mut stack: Vec<(usize, Vec<usize>)> = Vec::new();
        let next_of = |s: usize| -> Vec<usize> {
            let mut out: Vec<usize> = mdp
                .enabled_actions(s)
                .flat_map(|a| mdp.successors(s, a).unwrap().iter().map(|&(t, _)| t))
                .filter(|&t| undiscounted(t))
                .collect();
            out.sort_unstable();
            out.dedup();
            out
        };
        mark[root] = Mark::Open;
        stack.push((root, next_of(root)));
        while let Some((s, pending)) = stack.last_mut() {
            match pending.pop() {
                Some(t) => match mark[t] {
                    Mark::Open => {
                        return Err(Error::InvalidDiscount(format!(
                            "cycle through states {s} and {t} has no discounting state"
                        )))
                    }
                    Mark::New => {
                        mark[t] = Mark::Open;
                        let succ = next_of(t);
                        stack.push((t, succ));
                    }
                    Mark::Done => {}
                },
                None => {
                    mark[*s] = Mark::Done;
                    stack.pop();
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> MdpBuilder {
        let mut b = MdpBuilder::new(2, 1, 0, 0.9, 1.0);
        b.transition(0, 0, 1, 1.0).transition(1, 0, 1, 1.0).reward(0, 0, 1.0);
        b
    }

    #[test]
    fn builds_valid_mdp() {
        let m = two_state().build().unwrap();
        assert_eq!(m.n_states(), 2);
        assert_eq!(m.prob(0, 0, 1), 1.0);
        assert_eq!(m.prob(0, 0, 0), 0.0);
        assert!(m.is_absorbing(1));
        assert!(!m.is_absorbing(0));
        assert!(m.has_uniform_discount());
    }

    #[test]
    fn rejects_unnormalized_row() {
        let mut b = MdpBuilder::new(2, 1, 0, 0.9, 1.0);
        b.transition(0, 0, 0, 0.5).transition(0, 0, 1, 0.4).transition(1, 0, 1, 1.0);
        assert!(matches!(b.build(), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rejects_state_without_actions() {
        let mut b = MdpBuilder::new(2, 1, 0, 0.9, 1.0);
        b.transition(0, 0, 1, 1.0);
        assert!(b.build().is_err());
    }

    #[test]
    fn rejects_reward_above_bound() {
        let mut b = two_state();
        b.reward(1, 0, 2.0);
        assert!(b.build().is_err());
    }

    #[test]
    fn rejects_reward_on_disabled_pair() {
        let mut b = MdpBuilder::new(1, 2, 0, 0.9, 1.0);
        b.transition(0, 0, 0, 1.0).reward(0, 1, 0.5);
        assert!(b.build().is_err());
    }

    #[test]
    fn rejects_undiscounted_cycle() {
        let mut b = MdpBuilder::new(3, 1, 0, 0.9, 1.0);
        b.transition(0, 0, 1, 1.0)
            .transition(1, 0, 2, 1.0)
            .transition(2, 0, 1, 1.0)
            .discount(1, 1.0)
            .discount(2, 1.0);
        assert!(matches!(b.build(), Err(Error::InvalidDiscount(_))));
    }

    #[test]
    fn accepts_undiscounted_chain() {
        let mut b = MdpBuilder::new(3, 1, 0, 0.9, 1.0);
        b.transition(0, 0, 1, 1.0)
            .transition(1, 0, 2, 1.0)
            .transition(2, 0, 0, 1.0)
            .discount(1, 1.0)
            .discount(2, 1.0);
        let m = b.build().unwrap();
        assert_eq!(m.min_discount(), 0.9);
        assert!(!m.has_uniform_discount());
    }

    #[test]
    fn rejects_bad_initial_state_and_discount() {
        assert!(MdpBuilder::new(1, 1, 1, 0.9, 1.0).build().is_err());
        let mut b = MdpBuilder::new(1, 1, 0, 1.0, 1.0);
        b.transition(0, 0, 0, 1.0);
        assert!(matches!(b.build(), Err(Error::InvalidDiscount(_))));
    }
}
