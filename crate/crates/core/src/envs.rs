//! Benchmark environments and behavior policies.
//!
//! Environment constants come from TOML spec files; the shipped ones under
//! `configs/envs` are compiled in and available through [`EnvSpec::builtin`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{greedy_policy, MdpBuilder, TabularMdp, DEFAULT_TOL};
use crate::policy::StochasticPolicy;

const GRIDWORLD_TOML: &str = include_str!("../../../configs/envs/gridworld.toml");
const WET_CHICKEN_TOML: &str = include_str!("../../../configs/envs/wet_chicken.toml");
const RESOURCE_GATHERING_TOML: &str = include_str!("../../../configs/envs/resource_gathering.toml");

pub const ENV_NAMES: [&str; 3] = ["gridworld", "wet_chicken", "resource_gathering"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum EnvSpec {
    Gridworld(GridworldParams),
    WetChicken(WetChickenParams),
    ResourceGathering(ResourceGatheringParams),
}

/// Square grid; actions up, right, down, left. The intended move happens with
/// `intended_prob`, each perpendicular move with half the remainder, and moves
/// into a wall leave the agent in place. Entering the goal pays `goal_reward`
/// and the goal is absorbing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridworldParams {
    pub size: usize,
    pub intended_prob: f64,
    pub goal_reward: f64,
    pub gamma: f64,
}

/// River of `length` x `width` cells; state `(x, y)` with `x` the distance
/// travelled downstream. Actions: drift, hold (`x - 1`), paddle back
/// (`x - 2`), move right (`y + 1`), move left (`y - 1`). The current adds
/// `round(flow · y / width)` and a turbulence step of `±1` with total
/// probability `(turbulence - flow · y / width) / turbulence`. Passing the end
/// of the river (the waterfall) resets to `(0, 0)`. The reward is the
/// expected `x` after the move.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WetChickenParams {
    pub length: usize,
    pub width: usize,
    pub flow: f64,
    pub turbulence: f64,
    pub gamma: f64,
}

/// Grid given as text rows (`H` home, `G` gold, `M` gem, `E` enemy, `#` wall,
/// `.` floor); state is an open cell plus two carried-resource flags.
///
/// Acting on a resource cell picks the resource up, acting at home delivers
/// everything carried, and acting on an enemy cell is punished with
/// probability `attack_prob`, which also drops the load and sends the agent
/// home. Moves are deterministic; walls and borders block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceGatheringParams {
    pub layout: Vec<String>,
    pub attack_prob: f64,
    pub gold_reward: f64,
    pub gem_reward: f64,
    pub attack_penalty: f64,
    pub gamma: f64,
}

impl EnvSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("env specs serialize")
    }

    /// Shipped spec for `name`.
    pub fn builtin(name: &str) -> Result<Self> {
        let text = match name {
            "gridworld" => GRIDWORLD_TOML,
            "wet_chicken" => WET_CHICKEN_TOML,
            "resource_gathering" => RESOURCE_GATHERING_TOML,
            other => return Err(Error::UnknownEnv(other.to_string())),
        };
        Self::from_toml(text)
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvSpec::Gridworld(_) => "gridworld",
            EnvSpec::WetChicken(_) => "wet_chicken",
            EnvSpec::ResourceGathering(_) => "resource_gathering",
        }
    }

    pub fn gamma(&self) -> f64 {
        match self {
            EnvSpec::Gridworld(p) => p.gamma,
            EnvSpec::WetChicken(p) => p.gamma,
            EnvSpec::ResourceGathering(p) => p.gamma,
        }
    }

    /// Bound on `|V|` used by the performance-loss bounds. The gridworld pays
    /// its reward at most once, so its bound is the goal reward itself.
    pub fn v_max(&self) -> f64 {
        match self {
            EnvSpec::Gridworld(p) => p.goal_reward.abs(),
            EnvSpec::WetChicken(p) => (p.length - 1) as f64 / (1.0 - p.gamma),
            EnvSpec::ResourceGathering(p) => {
                let r_max = (p.gold_reward.abs() + p.gem_reward.abs())
                    .max(p.attack_prob * p.attack_penalty.abs());
                r_max / (1.0 - p.gamma)
            }
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameters(format!("gamma {gamma} outside (0, 1)")))
    }
}

pub fn build_env(spec: &EnvSpec) -> Result<TabularMdp> {
    match spec {
        EnvSpec::Gridworld(p) => gridworld(p),
        EnvSpec::WetChicken(p) => wet_chicken(p),
        EnvSpec::ResourceGathering(p) => resource_gathering(p),
    }
}

const MOVES: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

fn gridworld(p: &GridworldParams) -> Result<TabularMdp> {
    check_gamma(p.gamma)?;
    if p.size < 2 {
        return Err(Error::InvalidParameters("gridworld size must be ≥ 2".into()));
    }
    if !(0.0..=1.0).contains(&p.intended_prob) {
        return Err(Error::InvalidParameters("intended_prob outside [0, 1]".into()));
    }
    let n = p.size;
    let goal = n * n - 1;
    let step = |s: usize, dir: usize| -> usize {
        let (r, c) = ((s / n) as isize, (s % n) as isize);
        let (nr, nc) = (r + MOVES[dir].0, c + MOVES[dir].1);
        if nr < 0 || nc < 0 || nr >= n as isize || nc >= n as isize {
            s
        } else {
            nr as usize * n + nc as usize
        }
    };
    let side = (1.0 - p.intended_prob) / 2.0;
    let mut b = MdpBuilder::new(n * n, 4, 0, p.gamma, p.goal_reward.abs());
    for s in 0..n * n {
        for a in 0..4 {
            if s == goal {
                b.transition(s, a, s, 1.0);
                continue;
            }
            let mut to_goal = 0.0;
            for (dir, prob) in [(a, p.intended_prob), ((a + 1) % 4, side), ((a + 3) % 4, side)] {
                let t = step(s, dir);
                b.transition(s, a, t, prob);
                if t == goal {
                    to_goal += prob;
                }
            }
            b.reward(s, a, to_goal * p.goal_reward);
        }
    }
    b.build()
}

fn wet_chicken(p: &WetChickenParams) -> Result<TabularMdp> {
    check_gamma(p.gamma)?;
    if p.length < 2 || p.width < 1 || !(p.turbulence > 0.0) || p.flow < 0.0 {
        return Err(Error::InvalidParameters("invalid wet chicken dimensions".into()));
    }
    let (len, wid) = (p.length as isize, p.width as isize);
    let idx = |x: isize, y: isize| (x * wid + y) as usize;
    const DX: [isize; 5] = [0, -1, -2, 0, 0];
    const DY: [isize; 5] = [0, 0, 0, 1, -1];
    let mut b = MdpBuilder::new(p.length * p.width, 5, 0, p.gamma, (p.length - 1) as f64);
    for x in 0..len {
        for y in 0..wid {
            let s = idx(x, y);
            let drift = p.flow * y as f64 / p.width as f64;
            let velocity = drift.round() as isize;
            let q = ((p.turbulence - drift) / p.turbulence).clamp(0.0, 1.0);
            for a in 0..5 {
                let ny = (y + DY[a]).clamp(0, wid - 1);
                let mut expected_x = 0.0;
                for (noise, prob) in [(-1, q / 2.0), (0, 1.0 - q), (1, q / 2.0)] {
                    if prob == 0.0 {
                        continue;
                    }
                    let nx = (x + DX[a] + velocity + noise).max(0);
                    let t = if nx >= len { idx(0, 0) } else { idx(nx, ny) };
                    b.transition(s, a, t, prob);
                    if nx < len {
                        expected_x += prob * nx as f64;
                    }
                }
                b.reward(s, a, expected_x);
            }
        }
    }
    b.build()
}

fn resource_gathering(p: &ResourceGatheringParams) -> Result<TabularMdp> {
    check_gamma(p.gamma)?;
    if !(0.0..=1.0).contains(&p.attack_prob) {
        return Err(Error::InvalidParameters("attack_prob outside [0, 1]".into()));
    }
    let rows = p.layout.len();
    let cols = p.layout.first().map_or(0, |r| r.chars().count());
    if rows == 0 || cols == 0 || p.layout.iter().any(|r| r.chars().count() != cols) {
        return Err(Error::InvalidParameters("layout must be a non-empty rectangle".into()));
    }
    let grid: Vec<Vec<char>> = p.layout.iter().map(|r| r.chars().collect()).collect();
    let mut cell_id = vec![vec![usize::MAX; cols]; rows];
    let mut cells = Vec::new();
    let (mut home, mut gold, mut gem) = (None, None, None);
    for (r, row) in grid.iter().enumerate() {
        for (c, &ch) in row.iter().enumerate() {
            match ch {
                '#' => continue,
                'H' | 'G' | 'M' | 'E' | '.' => {}
                other => {
                    return Err(Error::InvalidParameters(format!("unknown layout symbol `{other}`")))
                }
            }
            let id = cells.len();
            cell_id[r][c] = id;
            cells.push((r, c, ch));
            let slot = match ch {
                'H' => &mut home,
                'G' => &mut gold,
                'M' => &mut gem,
                _ => continue,
            };
            if slot.replace(id).is_some() {
                return Err(Error::InvalidParameters(format!("layout has more than one `{ch}`")));
            }
        }
    }
    let (Some(home), Some(_), Some(_)) = (home, gold, gem) else {
        return Err(Error::InvalidParameters("layout needs one H, G and M".into()));
    };
    // State = cell * 4 + flags, flag bit 0 = gold, bit 1 = gem.
    let state = |cell: usize, flags: usize| cell * 4 + flags;
    let r_max = (p.gold_reward.abs() + p.gem_reward.abs()).max(p.attack_prob * p.attack_penalty.abs());
    let mut b = MdpBuilder::new(cells.len() * 4, 4, state(home, 0), p.gamma, r_max);
    for (cell, &(r, c, ch)) in cells.iter().enumerate() {
        for flags in 0..4 {
            let s = state(cell, flags);
            let mut carried = flags;
            let mut reward = 0.0;
            match ch {
                'G' => carried |= 1,
                'M' => carried |= 2,
                'H' => {
                    if flags & 1 != 0 {
                        reward += p.gold_reward;
                    }
                    if flags & 2 != 0 {
                        reward += p.gem_reward;
                    }
                    carried = 0;
                }
                _ => {}
            }
            let attack = if ch == 'E' { p.attack_prob } else { 0.0 };
            for (a, &(dr, dc)) in MOVES.iter().enumerate() {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                let target = if nr < 0
                    || nc < 0
                    || nr >= rows as isize
                    || nc >= cols as isize
                    || grid[nr as usize][nc as usize] == '#'
                {
                    cell
                } else {
                    cell_id[nr as usize][nc as usize]
                };
                if attack > 0.0 {
                    b.transition(s, a, state(home, 0), attack);
                }
                if attack < 1.0 {
                    b.transition(s, a, state(target, carried), 1.0 - attack);
                }
                b.reward(s, a, reward - attack * p.attack_penalty);
            }
        }
    }
    b.build()
}

/// Q-learning episodes restart from the initial state after this many steps.
pub const Q_LEARNING_EPISODE_LEN: usize = 200;

fn softmax_row(mdp: &TabularMdp, q: &[f64], s: usize, temp: f64, out: &mut [f64]) {
    let na = mdp.n_actions();
    let max = mdp
        .enabled_actions(s)
        .map(|a| q[s * na + a])
        .fold(f64::NEG_INFINITY, f64::max);
    out.iter_mut().for_each(|p| *p = 0.0);
    let mut total = 0.0;
    for a in mdp.enabled_actions(s) {
        let w = ((q[s * na + a] - max) / temp).exp();
        out[a] = w;
        total += w;
    }
    out.iter_mut().for_each(|p| *p /= total);
}

fn sample(rng: &mut ChaCha8Rng, entries: impl Iterator<Item = (usize, f64)>) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in entries {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Tabular Q-learning on `mdp` for `q_steps` steps with softmax exploration;
/// returns `softmax(Q / temp)`.
pub fn behavior_softmax_q(
    mdp: &TabularMdp,
    q_steps: usize,
    lr: f64,
    temp: f64,
    rng_seed: u64,
) -> Result<StochasticPolicy> {
    if !(lr > 0.0 && temp > 0.0) {
        return Err(Error::InvalidParameters("lr and temp must be positive".into()));
    }
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut q = vec![0.0; ns * na];
    let mut probs = vec![0.0; na];
    let mut s = mdp.initial_state();
    let mut t = 0;
    for _ in 0..q_steps {
        softmax_row(mdp, &q, s, temp, &mut probs);
        let a = sample(&mut rng, probs.iter().copied().enumerate());
        let next = sample(&mut rng, mdp.successors(s, a).unwrap().iter().copied());
        let best_next = mdp
            .enabled_actions(next)
            .map(|b| q[next * na + b])
            .fold(f64::NEG_INFINITY, f64::max);
        let target = mdp.reward(s, a) + mdp.discount(next) * best_next;
        q[s * na + a] += lr * (target - q[s * na + a]);
        s = next;
        t += 1;
        if t == Q_LEARNING_EPISODE_LEN || mdp.is_absorbing(s) {
            s = mdp.initial_state();
            t = 0;
        }
    }
    let mut table = vec![0.0; ns * na];
    for s in 0..ns {
        softmax_row(mdp, &q, s, temp, &mut table[s * na..(s + 1) * na]);
    }
    StochasticPolicy::new(ns, na, table)
}

/// Optimal policy where each other enabled action keeps probability `epsilon`.
pub fn behavior_perturbed_optimal(mdp: &TabularMdp, epsilon: f64) -> Result<StochasticPolicy> {
    let max_other = (0..mdp.n_states())
        .map(|s| mdp.enabled_actions(s).count() - 1)
        .max()
        .unwrap_or(0);
    if !(epsilon >= 0.0 && epsilon * (max_other as f64) < 1.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let opt = greedy_policy(mdp, DEFAULT_TOL)?;
    let na = mdp.n_actions();
    let mut table = vec![0.0; mdp.n_states() * na];
    for s in 0..mdp.n_states() {
        let best = opt.deterministic_action(s).expect("greedy policies are deterministic");
        let mut others = 0;
        for a in mdp.enabled_actions(s).filter(|&a| a != best) {
            table[s * na + a] = epsilon;
            others += 1;
        }
        table[s * na + best] = 1.0 - epsilon * others as f64;
    }
    StochasticPolicy::new(mdp.n_states(), na, table)
}
