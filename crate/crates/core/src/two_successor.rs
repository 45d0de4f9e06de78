//! Two-successor transformation.
//!
//! Every enabled pair `(s, a)` with `k > 2` successors `s_1, ..., s_k` is
//! replaced by a linear chain of auxiliary states `x_2, ..., x_{k-1}`, each
//! enabling only the reserved action `τ` and splitting the remaining mass in
//! two: `x_i` moves to `s_i` with probability `p_i / (p_i + ... + p_k)` and to
//! `x_{i+1}` otherwise, while `x_{k-1}` splits between `s_{k-1}` and `s_k`.
//! Auxiliary states carry no reward and no discount, so every original
//! transition corresponds to exactly one path of equal probability and policy
//! values are unchanged.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mdp::{path_probability, performance_with, MdpBuilder, TabularMdp};
use crate::policy::StochasticPolicy;

/// Smallest admissible remaining mass at a chain link.
pub const MIN_RESIDUAL: f64 = 1e-15;

/// Enumeration order of the successors of a pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SuccessorOrder {
    #[default]
    Ascending,
    Descending,
}

impl SuccessorOrder {
    /// Reorders `(successor, weight)` entries that are sorted by ascending successor.
    pub fn arrange<T>(self, entries: &mut [T]) {
        if self == SuccessorOrder::Descending {
            entries.reverse();
        }
    }
}

/// Provenance of an auxiliary state: it is `x_position` of the chain built
/// for `(state, action)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AuxState {
    pub id: usize,
    pub state: usize,
    pub action: usize,
    pub position: usize,
}

/// Auxiliary-state layout shared by the MDP and the data-set transformation.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainLayout {
    n_main: usize,
    n_actions: usize,
    aux: Vec<AuxState>,
    /// Ordered successors of every pair that received a chain.
    chains: BTreeMap<(usize, usize), Vec<usize>>,
}

impl ChainLayout {
    /// Allocates chains for every pair in `rows` with more than two successors.
    /// Auxiliary ids follow the main states in `(s, a, position)` order.
    pub(crate) fn new(
        n_main: usize,
        n_actions: usize,
        rows: &BTreeMap<(usize, usize), Vec<usize>>,
    ) -> Self {
        let mut aux = Vec::new();
        let mut chains = BTreeMap::new();
        for (&(s, a), succ) in rows {
            if succ.len() > 2 {
                for position in 2..succ.len() {
                    aux.push(AuxState {
                        id: n_main + aux.len(),
                        state: s,
                        action: a,
                        position,
                    });
                }
                chains.insert((s, a), succ.clone());
            }
        }
        Self {
            n_main,
            n_actions,
            aux,
            chains,
        }
    }

    pub fn n_main(&self) -> usize {
        self.n_main
    }

    pub fn n_states(&self) -> usize {
        self.n_main + self.aux.len()
    }

    /// The reserved action `τ`; equal to the original number of actions.
    pub fn tau_action(&self) -> usize {
        self.n_actions
    }

    pub fn aux_states(&self) -> &[AuxState] {
        &self.aux
    }

    pub fn is_aux(&self, x: usize) -> bool {
        x >= self.n_main && x < self.n_states()
    }

    /// Ordered successors `s_1..s_k` of a pair that received a chain.
    pub fn chain_successors(&self, s: usize, a: usize) -> Option<&[usize]> {
        self.chains.get(&(s, a)).map(Vec::as_slice)
    }

    /// Id of `x_position` in the chain of `(s, a)`.
    pub fn aux_id(&self, s: usize, a: usize, position: usize) -> Option<usize> {
        let first = self
            .aux
            .partition_point(|x| (x.state, x.action) < (s, a));
        let x = self.aux.get(first + position.checked_sub(2)?)?;
        (x.state == s && x.action == a && x.position == position).then_some(x.id)
    }

    /// The unique path `⟨s, a, x_2, τ, ..., x_i, τ, next⟩` realizing the
    /// original transition `(s, a, next)`, or `None` if `next` is not a chain
    /// successor of `(s, a)`. Pairs without a chain map to `⟨s, a, next⟩`.
    pub fn path_for(&self, s: usize, a: usize, next: usize) -> Option<Vec<usize>> {
        let Some(succ) = self.chain_successors(s, a) else {
            return Some(vec![s, a, next]);
        };
        let j = succ.iter().position(|&t| t == next)? + 1;
        let mut path = vec![s, a];
        if j > 1 {
            let last = j.min(succ.len() - 1);
            for i in 2..=last {
                path.push(self.aux_id(s, a, i).unwrap());
                path.push(self.tau_action());
            }
        }
        path.push(next);
        Some(path)
    }

    /// Sidecar lines `aux <x_id> <s> <a> <i>`.
    pub fn sidecar_text(&self) -> String {
        let mut out = String::new();
        for x in &self.aux {
            writeln!(out, "aux {} {} {} {}", x.id, x.state, x.action, x.position).unwrap();
        }
        out
    }

    /// Empty builder over the two-successor state space: main states copy the
    /// template's discount, auxiliary states get discount one.
    pub(crate) fn builder(&self, template: &TabularMdp) -> MdpBuilder {
        let mut b = MdpBuilder::new(
            self.n_states(),
            self.n_actions + 1,
            template.initial_state(),
            template.default_discount(),
            template.r_max(),
        );
        for s in 0..self.n_main {
            if template.discount(s) != template.default_discount() {
                b.discount(s, template.discount(s));
            }
        }
        for x in &self.aux {
            b.discount(x.id, 1.0);
        }
        b
    }
}

/// A two-successor MDP together with its auxiliary-state layout.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoSuccessorMdp {
    mdp: TabularMdp,
    layout: ChainLayout,
}

impl TwoSuccessorMdp {
    pub(crate) fn from_parts(mdp: TabularMdp, layout: ChainLayout) -> Self {
        Self { mdp, layout }
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    pub fn layout(&self) -> &ChainLayout {
        &self.layout
    }

    pub fn n_main(&self) -> usize {
        self.layout.n_main()
    }

    pub fn tau_action(&self) -> usize {
        self.layout.tau_action()
    }

    /// Rebuilds a one-step MDP by multiplying probabilities along every chain.
    pub fn collapse(&self) -> Result<TabularMdp> {
        let n_actions = self.tau_action();
        let mut b = MdpBuilder::new(
            self.n_main(),
            n_actions,
            self.mdp.initial_state(),
            self.mdp.default_discount(),
            self.mdp.r_max(),
        );
        for s in 0..self.n_main() {
            if self.mdp.discount(s) != self.mdp.default_discount() {
                b.discount(s, self.mdp.discount(s));
            }
            for a in self.mdp.enabled_actions(s).filter(|&a| a < n_actions) {
                match self.layout.chain_successors(s, a) {
                    Some(succ) => {
                        for &t in succ {
                            let path = self.layout.path_for(s, a, t).unwrap();
                            b.transition(s, a, t, path_probability(&self.mdp, &path)?);
                        }
                    }
                    None => {
                        b.row(s, a, self.mdp.successors(s, a).unwrap().iter().copied());
                    }
                }
                b.reward(s, a, self.mdp.reward(s, a));
            }
        }
        b.build()
    }
}

/// Splits one ordered row into the chain transitions. `weights[j]` is the
/// (unnormalized) weight of the `j`-th successor; probabilities are ratios
/// of tail sums, so the same routine serves probabilities and counts.
pub(crate) fn emit_chain(
    b: &mut MdpBuilder,
    layout: &ChainLayout,
    s: usize,
    a: usize,
    succ: &[usize],
    weights: &[f64],
) -> Result<()> {
    let k = succ.len();
    debug_assert!(k > 2 && weights.len() == k);
    let mut tails = vec![0.0; k + 1];
    for j in (0..k).rev() {
        tails[j] = tails[j + 1] + weights[j];
    }
    let tau = layout.tau_action();
    let split = |i: usize| -> Result<f64> {
        if tails[i] < MIN_RESIDUAL * tails[0] {
            return Err(Error::InvalidInput(format!(
                "residual mass {} at link {} of ({s}, {a}) is too small",
                tails[i] / tails[0],
                i + 1
            )));
        }
        Ok(weights[i] / tails[i])
    };

    let p1 = split(0)?;
    b.transition(s, a, succ[0], p1);
    b.transition(s, a, layout.aux_id(s, a, 2).unwrap(), 1.0 - p1);
    // 0-based index i is chain position i + 1
    for i in 1..k - 1 {
        let x = layout.aux_id(s, a, i + 1).unwrap();
        let q = split(i)?;
        b.transition(x, tau, succ[i], q);
        let rest = if i + 1 == k - 1 {
            succ[k - 1]
        } else {
            layout.aux_id(s, a, i + 2).unwrap()
        };
        b.transition(x, tau, rest, 1.0 - q);
    }
    Ok(())
}

/// Transforms an MDP with uniform discount into a two-successor MDP.
pub fn transform_mdp(m: &TabularMdp, order: SuccessorOrder) -> Result<TwoSuccessorMdp> {
    if !m.has_uniform_discount() {
        return Err(Error::InvalidInput(
            "two-successor transformation needs a uniform discount".into(),
        ));
    }
    let mut ordered: BTreeMap<(usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
    for s in 0..m.n_states() {
        for a in m.enabled_actions(s) {
            let mut row = m.successors(s, a).unwrap().to_vec();
            order.arrange(&mut row);
            ordered.insert((s, a), row);
        }
    }
    let succ_lists = ordered
        .iter()
        .map(|(&k, row)| (k, row.iter().map(|&(t, _)| t).collect()))
        .collect();
    let layout = ChainLayout::new(m.n_states(), m.n_actions(), &succ_lists);

    let mut b = layout.builder(m);
    for (&(s, a), row) in &ordered {
        if row.len() > 2 {
            let succ: Vec<usize> = row.iter().map(|&(t, _)| t).collect();
            let weights: Vec<f64> = row.iter().map(|&(_, p)| p).collect();
            emit_chain(&mut b, &layout, s, a, &succ, &weights)?;
        } else {
            b.row(s, a, row.iter().copied());
        }
        b.reward(s, a, m.reward(s, a));
    }
    Ok(TwoSuccessorMdp::from_parts(b.build()?, layout))
}

/// Extends a policy of the original MDP: unchanged on main states, `τ` with
/// probability one on auxiliary states.
pub fn extend_policy(pi: &StochasticPolicy, t: &TwoSuccessorMdp) -> Result<StochasticPolicy> {
    extend_policy_layout(pi, t.layout())
}

/// [`extend_policy`] given only the chain layout.
pub fn extend_policy_layout(
    pi: &StochasticPolicy,
    layout: &ChainLayout,
) -> Result<StochasticPolicy> {
    let na = layout.tau_action();
    if pi.n_states() != layout.n_main() || pi.n_actions() != na {
        return Err(Error::DimensionMismatch(format!(
            "policy is {}x{}, expected {}x{}",
            pi.n_states(),
            pi.n_actions(),
            layout.n_main(),
            na
        )));
    }
    let n = layout.n_states();
    let mut probs = vec![0.0; n * (na + 1)];
    for s in 0..layout.n_main() {
        probs[s * (na + 1)..s * (na + 1) + na].copy_from_slice(pi.row(s));
    }
    for x in layout.n_main()..n {
        probs[x * (na + 1) + na] = 1.0;
    }
    StochasticPolicy::new(n, na + 1, probs)
}

/// Inverse of [`extend_policy_layout`]: the main-state rows without the `τ` column.
pub fn restrict_policy(pi: &StochasticPolicy, layout: &ChainLayout) -> Result<StochasticPolicy> {
    let na = layout.tau_action();
    if pi.n_states() != layout.n_states() || pi.n_actions() != na + 1 {
        return Err(Error::DimensionMismatch(format!(
            "policy is {}x{}, expected {}x{}",
            pi.n_states(),
            pi.n_actions(),
            layout.n_states(),
            na + 1
        )));
    }
    let probs = (0..layout.n_main())
        .flat_map(|s| pi.row(s)[..na].iter().copied())
        .collect();
    StochasticPolicy::new(layout.n_main(), na, probs)
}

/// Gaps between an MDP and its two-successor transformation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PreservationReport {
    /// Largest `|P(s,a,s') - P(path)|` over all original transitions.
    pub max_prob_gap: f64,
    /// `|ρ(π, M) - ρ(π^2s, M^2s)|`.
    pub perf_gap: f64,
    pub tol: f64,
}

impl PreservationReport {
    pub fn passed(&self) -> bool {
        self.max_prob_gap <= self.tol && self.perf_gap <= self.tol
    }
}

/// Value-iteration tolerance used on both sides of the performance check.
pub const PRESERVATION_VI_TOL: f64 = 1e-11;

/// Compares transition probabilities and performance of `m` and `t`. Failures
/// to evaluate (or missing paths) show up as infinite gaps.
pub fn verify_preservation(
    m: &TabularMdp,
    t: &TwoSuccessorMdp,
    pi: &StochasticPolicy,
    tol: f64,
) -> PreservationReport {
    let mut max_prob_gap: f64 = 0.0;
    for s in 0..m.n_states() {
        for a in m.enabled_actions(s) {
            for &(next, p) in m.successors(s, a).unwrap() {
                let gap = t
                    .layout()
                    .path_for(s, a, next)
                    .and_then(|path| path_probability(t.mdp(), &path).ok())
                    .map_or(f64::INFINITY, |q| (p - q).abs());
                max_prob_gap = max_prob_gap.max(gap);
            }
        }
    }
    let perf_gap = (|| -> Result<f64> {
        let original = performance_with(m, pi, PRESERVATION_VI_TOL)?;
        let extended = extend_policy(pi, t)?;
        let transformed = performance_with(t.mdp(), &extended, PRESERVATION_VI_TOL)?;
        Ok((original - transformed).abs())
    })()
    .unwrap_or(f64::INFINITY);
    PreservationReport {
        max_prob_gap,
        perf_gap,
        tol,
    }
}
