//! Offline data: trajectory sampling, transition counts, maximum-likelihood
//! MDPs, bootstrap sets and the count-level two-successor transformation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::AddAssign;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use crate::policy::StochasticPolicy;
use crate::two_successor::{ChainLayout, SuccessorOrder, TwoSuccessorMdp};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

/// One episode; consecutive steps chain (`next_state` of step `t` is the
/// `state` of step `t + 1`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn is_chained(&self) -> bool {
        self.steps.windows(2).all(|w| w[0].next_state == w[1].state)
    }
}

/// Draws an index from a discrete distribution given as `(item, prob)` pairs.
fn draw<R: Rng>(rng: &mut R, entries: impl Iterator<Item = (usize, f64)>) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = None;
    for (item, p) in entries {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = Some(item);
        if u < acc {
            return item;
        }
    }
    last.expect("distribution has positive mass")
}

/// Samples `n_steps` transitions under `pi_b`. Episodes start in `ι` and end
/// after `episode_len` steps or on entering an absorbing state.
pub fn sample_trajectories(
    mdp: &TabularMdp,
    pi_b: &StochasticPolicy,
    n_steps: usize,
    episode_len: usize,
    rng_seed: u64,
) -> Result<Vec<Trajectory>> {
    pi_b.validate_for(mdp)?;
    if n_steps == 0 || episode_len == 0 {
        return Err(Error::InvalidInput("n_steps and episode_len must be positive".into()));
    }
    let absorbing: Vec<bool> = (0..mdp.n_states()).map(|s| mdp.is_absorbing(s)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut out = Vec::new();
    let mut remaining = n_steps;
    while remaining > 0 {
        let mut episode = Trajectory::default();
        let mut s = mdp.initial_state();
        while remaining > 0 && episode.len() < episode_len {
            let a = draw(&mut rng, pi_b.row(s).iter().copied().enumerate());
            let next = draw(&mut rng, mdp.successors(s, a).unwrap().iter().copied());
            episode.steps.push(Step {
                state: s,
                action: a,
                reward: mdp.reward(s, a),
                next_state: next,
            });
            remaining -= 1;
            s = next;
            if absorbing[s] {
                break;
            }
        }
        out.push(episode);
    }
    Ok(out)
}

/// `#D(s,a)`, `#D(s,a,s')` and per-pair reward sums.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionCounts {
    n_states: usize,
    n_actions: usize,
    pair_counts: Vec<u64>,
    triple_counts: Vec<BTreeMap<usize, u64>>,
    reward_sums: Vec<f64>,
}

impl TransitionCounts {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            pair_counts: vec![0; n_states * n_actions],
            triple_counts: vec![BTreeMap::new(); n_states * n_actions],
            reward_sums: vec![0.0; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn record(&mut self, step: &Step) {
        self.add(step.state, step.action, step.next_state, 1, step.reward);
    }

    /// Adds `n` observations of `(s, a, next)` with total reward `reward_sum`.
    pub fn add(&mut self, s: usize, a: usize, next: usize, n: u64, reward_sum: f64) {
        let i = s * self.n_actions + a;
        self.pair_counts[i] += n;
        *self.triple_counts[i].entry(next).or_insert(0) += n;
        self.reward_sums[i] += reward_sum;
    }

    /// `#D(s, a)`.
    pub fn pair(&self, s: usize, a: usize) -> u64 {
        self.pair_counts[s * self.n_actions + a]
    }

    /// `#D(s, a, next)`.
    pub fn triple(&self, s: usize, a: usize, next: usize) -> u64 {
        self.triple_counts[s * self.n_actions + a]
            .get(&next)
            .copied()
            .unwrap_or(0)
    }

    /// Observed successors of `(s, a)` with their counts, ascending by state.
    pub fn successors(&self, s: usize, a: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.triple_counts[s * self.n_actions + a]
            .iter()
            .map(|(&t, &n)| (t, n))
    }

    pub fn reward_sum(&self, s: usize, a: usize) -> f64 {
        self.reward_sums[s * self.n_actions + a]
    }

    pub fn total(&self) -> u64 {
        self.pair_counts.iter().sum()
    }

    /// Counts cache as `c <s> <a> <s'> <n>` lines.
    pub fn to_text(&self) -> String {
        let mut out = format!("# counts {} {}\n", self.n_states, self.n_actions);
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                for (t, n) in self.successors(s, a) {
                    writeln!(out, "c {s} {a} {t} {n}").unwrap();
                }
            }
        }
        out
    }

    /// Parses a counts cache. Reward sums are not part of the cache and start at zero.
    pub fn from_text(text: &str, n_states: usize, n_actions: usize) -> Result<Self> {
        let mut counts = Self::new(n_states, n_actions);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| Error::Parse {
                line: i + 1,
                msg: msg.into(),
            };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 5 || f[0] != "c" {
                return Err(err("expected `c <s> <a> <s'> <n>`"));
            }
            let parse = |x: &str| x.parse::<u64>().map_err(|_| err("bad integer"));
            let (s, a, t, n) = (parse(f[1])?, parse(f[2])?, parse(f[3])?, parse(f[4])?);
            let (s, a, t) = (s as usize, a as usize, t as usize);
            if s >= n_states || a >= n_actions || t >= n_states {
                return Err(err("index out of range"));
            }
            counts.add(s, a, t, n, 0.0);
        }
        Ok(counts)
    }
}

impl AddAssign<&TransitionCounts> for TransitionCounts {
    fn add_assign(&mut self, rhs: &TransitionCounts) {
        assert_eq!(
            (self.n_states, self.n_actions),
            (rhs.n_states, rhs.n_actions),
            "count tables differ in shape"
        );
        for i in 0..self.pair_counts.len() {
            self.pair_counts[i] += rhs.pair_counts[i];
            self.reward_sums[i] += rhs.reward_sums[i];
            for (&t, &n) in &rhs.triple_counts[i] {
                *self.triple_counts[i].entry(t).or_insert(0) += n;
            }
        }
    }
}

/// Tallies all steps of `trajectories`.
pub fn count(trajectories: &[Trajectory], n_states: usize, n_actions: usize) -> TransitionCounts {
    let mut counts = TransitionCounts::new(n_states, n_actions);
    for step in trajectories.iter().flat_map(|t| &t.steps) {
        counts.record(step);
    }
    counts
}

/// Where the MLE-MDP takes its rewards from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RewardModel {
    /// Rewards of the template MDP.
    #[default]
    Known,
    /// Empirical mean reward per visited pair.
    Estimated,
}

/// Maximum-likelihood MDP `P̃(s'|s,a) = #D(s,a,s') / #D(s,a)` over the shape
/// of `template`. Enabled but unvisited pairs become zero-reward self-loops;
/// disabled pairs stay disabled.
pub fn build_mle_mdp(
    counts: &TransitionCounts,
    template: &TabularMdp,
    rewards: RewardModel,
) -> Result<TabularMdp> {
    if counts.n_states() != template.n_states() || counts.n_actions() != template.n_actions() {
        return Err(Error::DimensionMismatch(
            "counts and template MDP differ in shape".into(),
        ));
    }
    let mut b = template.shape_builder();
    for s in 0..template.n_states() {
        for a in template.enabled_actions(s) {
            let total = counts.pair(s, a);
            if total == 0 {
                b.row(s, a, [(s, 1.0)]);
                continue;
            }
            let n = total as f64;
            b.row(s, a, counts.successors(s, a).map(|(t, c)| (t, c as f64 / n)));
            let r = match rewards {
                RewardModel::Known => template.reward(s, a),
                RewardModel::Estimated => {
                    (counts.reward_sum(s, a) / n).clamp(-template.r_max(), template.r_max())
                }
            };
            b.reward(s, a, r);
        }
    }
    b.build()
}

/// Threshold value meaning "bootstrap every pair".
pub const UNBOUNDED: u64 = u64::MAX;

/// Pairs with too few samples, on which the improved policy must copy the
/// behavior policy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BootstrapSet {
    n_states: usize,
    n_actions: usize,
    members: Vec<bool>,
}

impl BootstrapSet {
    pub fn from_fn(n_states: usize, n_actions: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let members = (0..n_states * n_actions)
            .map(|i| f(i / n_actions, i % n_actions))
            .collect();
        Self {
            n_states,
            n_actions,
            members,
        }
    }

    pub fn empty(n_states: usize, n_actions: usize) -> Self {
        Self::from_fn(n_states, n_actions, |_, _| false)
    }

    pub fn full(n_states: usize, n_actions: usize) -> Self {
        Self::from_fn(n_states, n_actions, |_, _| true)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn contains(&self, s: usize, a: usize) -> bool {
        self.members[s * self.n_actions + a]
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.members
            .iter()
            .enumerate()
            .filter(|&(_, &m)| m)
            .map(|(i, _)| (i / self.n_actions, i % self.n_actions))
    }

    pub fn is_subset(&self, other: &BootstrapSet) -> bool {
        self.members
            .iter()
            .zip(&other.members)
            .all(|(&a, &b)| !a || b)
    }
}

/// `U = {(s, a) | #D(s, a) <= n_wedge}`.
pub fn bootstrap_set(counts: &TransitionCounts, n_wedge: u64) -> BootstrapSet {
    BootstrapSet::from_fn(counts.n_states(), counts.n_actions(), |s, a| {
        counts.pair(s, a) <= n_wedge
    })
}

/// Counts over the two-successor state space together with their chain layout.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoSuccessorCounts {
    counts: TransitionCounts,
    layout: ChainLayout,
}

impl TwoSuccessorCounts {
    pub fn counts(&self) -> &TransitionCounts {
        &self.counts
    }

    pub fn layout(&self) -> &ChainLayout {
        &self.layout
    }

    /// Bootstrap set on the transformed space: main pairs by count threshold,
    /// plus every auxiliary `(x, τ)` pair.
    pub fn bootstrap_set(&self, n_wedge: u64) -> BootstrapSet {
        let tau = self.layout.tau_action();
        BootstrapSet::from_fn(self.counts.n_states(), self.counts.n_actions(), |s, a| {
            if self.layout.is_aux(s) {
                a == tau
            } else {
                a != tau && self.counts.pair(s, a) <= n_wedge
            }
        })
    }

    /// MLE of the transformed counts. Main pairs follow [`build_mle_mdp`]
    /// (with known rewards from `template`); auxiliary pairs get reward 0 and
    /// discount 1.
    pub fn mle_mdp(&self, template: &TabularMdp) -> Result<TwoSuccessorMdp> {
        if template.n_states() != self.layout.n_main()
            || template.n_actions() != self.layout.tau_action()
        {
            return Err(Error::DimensionMismatch(
                "template does not match the main state space".into(),
            ));
        }
        let mut b = self.layout.builder(template);
        let tau = self.layout.tau_action();
        for s in 0..template.n_states() {
            for a in template.enabled_actions(s) {
                let total = self.counts.pair(s, a);
                if total == 0 {
                    b.row(s, a, [(s, 1.0)]);
                    continue;
                }
                let n = total as f64;
                b.row(s, a, self.counts.successors(s, a).map(|(t, c)| (t, c as f64 / n)));
                b.reward(s, a, template.reward(s, a));
            }
        }
        for x in self.layout.aux_states() {
            let n = self.counts.pair(x.id, tau) as f64;
            b.row(
                x.id,
                tau,
                self.counts.successors(x.id, tau).map(|(t, c)| (t, c as f64 / n)),
            );
        }
        Ok(TwoSuccessorMdp::from_parts(b.build()?, self.layout.clone()))
    }
}

/// Count-level two-successor transformation over the observed successors of
/// every pair.
///
/// With observed successors `s_1..s_k` of `(s, a)` (k > 2):
/// `#(s,a,s_1)`, `#(s,a,x_2) = Σ_{j≥2} #(s,a,s_j)`, and for each link
/// `#(x_i,τ,s_i) = #(s,a,s_i)`, `#(x_i,τ,x_{i+1}) = Σ_{j>i} #(s,a,s_j)`;
/// the last link `x_{k-1}` splits into `s_{k-1}` and `s_k`.
pub fn transform_dataset(counts: &TransitionCounts, order: SuccessorOrder) -> TwoSuccessorCounts {
    let (ns, na) = (counts.n_states(), counts.n_actions());
    let mut ordered: BTreeMap<(usize, usize), Vec<(usize, u64)>> = BTreeMap::new();
    for s in 0..ns {
        for a in 0..na {
            let mut row: Vec<(usize, u64)> = counts.successors(s, a).collect();
            if row.is_empty() {
                continue;
            }
            order.arrange(&mut row);
            ordered.insert((s, a), row);
        }
    }
    let succ_lists = ordered
        .iter()
        .map(|(&k, row)| (k, row.iter().map(|&(t, _)| t).collect()))
        .collect();
    let layout = ChainLayout::new(ns, na, &succ_lists);
    let tau = layout.tau_action();
    let mut out = TransitionCounts::new(layout.n_states(), na + 1);

    for (&(s, a), row) in &ordered {
        let r = counts.reward_sum(s, a);
        let k = row.len();
        if k <= 2 {
            for (j, &(t, n)) in row.iter().enumerate() {
                out.add(s, a, t, n, if j == 0 { r } else { 0.0 });
            }
            continue;
        }
        let mut tails = vec![0u64; k + 1];
        for j in (0..k).rev() {
            tails[j] = tails[j + 1] + row[j].1;
        }
        out.add(s, a, row[0].0, row[0].1, r);
        out.add(s, a, layout.aux_id(s, a, 2).unwrap(), tails[1], 0.0);
        for i in 1..k - 1 {
            let x = layout.aux_id(s, a, i + 1).unwrap();
            out.add(x, tau, row[i].0, row[i].1, 0.0);
            if i + 1 == k - 1 {
                out.add(x, tau, row[k - 1].0, row[k - 1].1, 0.0);
            } else {
                out.add(x, tau, layout.aux_id(s, a, i + 2).unwrap(), tails[i + 1], 0.0);
            }
        }
    }
    TwoSuccessorCounts {
        counts: out,
        layout,
    }
}

/// Trajectory file: one `s a r s'` step per line, blank line between episodes.
pub fn trajectories_to_text(trajectories: &[Trajectory]) -> String {
    let mut out = String::new();
    for (i, t) in trajectories.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for st in &t.steps {
            writeln!(out, "{} {} {} {}", st.state, st.action, st.reward, st.next_state).unwrap();
        }
    }
    out
}

pub fn trajectories_from_text(text: &str) -> Result<Vec<Trajectory>> {
    let mut out = Vec::new();
    let mut current = Trajectory::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            continue;
        }
        let err = |msg: &str| Error::Parse {
            line: i + 1,
            msg: msg.into(),
        };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(err("expected `s a r s'`"));
        }
        let step = Step {
            state: f[0].parse().map_err(|_| err("bad state"))?,
            action: f[1].parse().map_err(|_| err("bad action"))?,
            reward: f[2].parse().map_err(|_| err("bad reward"))?,
            next_state: f[3].parse().map_err(|_| err("bad next state"))?,
        };
        current.steps.push(step);
    }
    if !current.is_empty() {
        out.push(current);
    }
    Ok(out)
}
