use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

/// Maximum allowed deviation of a policy row sum from one.
pub const POLICY_ROW_TOL: f64 = 1e-12;

/// Memoryless stochastic policy stored as a dense `n_states x n_actions` table.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl StochasticPolicy {
    /// Builds a policy from a row-major probability table. Rows must be
    /// distributions.
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(Error::DimensionMismatch(format!(
                "policy table has {} entries, expected {}",
                probs.len(),
                n_states * n_actions
            )));
        }
        for s in 0..n_states {
            let row = &probs[s * n_actions..(s + 1) * n_actions];
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidInput(format!("policy row {s} has entries outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > POLICY_ROW_TOL {
                return Err(Error::InvalidInput(format!("policy row {s} sums to {sum}")));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    /// Uniform distribution over the enabled actions of each state.
    pub fn uniform(mdp: &TabularMdp) -> Self {
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        let mut probs = vec![0.0; ns * na];
        for s in 0..ns {
            let enabled: Vec<usize> = mdp.enabled_actions(s).collect();
            let w = 1.0 / enabled.len() as f64;
            for a in enabled {
                probs[s * na + a] = w;
            }
        }
        Self {
            n_states: ns,
            n_actions: na,
            probs,
        }
    }

    /// One action per state with probability one.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Result<Self> {
        let n_states = actions.len();
        let mut probs = vec![0.0; n_states * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::DimensionMismatch(format!(
                    "action {a} of state {s} out of range"
                )));
            }
            probs[s * n_actions + a] = 1.0;
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub(crate) fn row_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// The action of state `s` if the row is a point mass.
    pub fn deterministic_action(&self, s: usize) -> Option<usize> {
        let row = self.row(s);
        let a = row.iter().position(|&p| p == 1.0)?;
        row.iter()
            .enumerate()
            .all(|(b, &p)| b == a || p == 0.0)
            .then_some(a)
    }

    /// Checks dimensions and that no mass sits on disabled actions.
    pub fn validate_for(&self, mdp: &TabularMdp) -> Result<()> {
        if self.n_states != mdp.n_states() || self.n_actions != mdp.n_actions() {
            return Err(Error::DimensionMismatch(format!(
                "policy is {}x{}, MDP is {}x{}",
                self.n_states,
                self.n_actions,
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                if self.prob(s, a) > 0.0 && !mdp.is_enabled(s, a) {
                    return Err(Error::InvalidInput(format!(
                        "policy puts mass {} on disabled pair ({s}, {a})",
                        self.prob(s, a)
                    )));
                }
            }
        }
        Ok(())
    }

    /// Serializes non-zero entries as `p <s> <a> <prob>` lines.
    pub fn to_text(&self) -> String {
        let mut out = format!("# policy {} {}\n", self.n_states, self.n_actions);
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let p = self.prob(s, a);
                if p > 0.0 {
                    writeln!(out, "p {s} {a} {p}").unwrap();
                }
            }
        }
        out
    }

    /// Parses `p <s> <a> <prob>` lines; unlisted entries are zero.
    pub fn from_text(text: &str, n_states: usize, n_actions: usize) -> Result<Self> {
        let mut probs = vec![0.0; n_states * n_actions];
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |msg: &str| Error::Parse {
                line: i + 1,
                msg: msg.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 || fields[0] != "p" {
                return Err(parse_err("expected `p <s> <a> <prob>`"));
            }
            let s: usize = fields[1].parse().map_err(|_| parse_err("bad state"))?;
            let a: usize = fields[2].parse().map_err(|_| parse_err("bad action"))?;
            let p: f64 = fields[3].parse().map_err(|_| parse_err("bad probability"))?;
            if s >= n_states || a >= n_actions {
                return Err(parse_err("state or action out of range"));
            }
            probs[s * n_actions + a] = p;
        }
        Self::new(n_states, n_actions, probs)
    }
}
