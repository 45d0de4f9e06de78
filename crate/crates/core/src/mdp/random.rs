use rand::Rng;

use super::{MdpBuilder, TabularMdp};

/// Shape of the random MDPs produced by [`random_mdp`].
#[derive(Clone, Copy, Debug)]
pub struct RandomMdpOptions {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    /// Probability that a given successor is kept in a row; `1.0` yields dense
    /// rows. Every row keeps at least one successor.
    pub density: f64,
    /// Probability that an action is disabled; action 0 is always enabled.
    pub disabled_fraction: f64,
}

impl RandomMdpOptions {
    pub fn dense(n_states: usize, n_actions: usize, gamma: f64) -> Self {
        Self {
            n_states,
            n_actions,
            gamma,
            density: 1.0,
            disabled_fraction: 0.0,
        }
    }
}

/// Random MDP with rewards uniform in `[-1, 1]` (`r_max = 1`) and initial state 0.
pub fn random_mdp<R: Rng + ?Sized>(rng: &mut R, opts: &RandomMdpOptions) -> TabularMdp {
    let RandomMdpOptions {
        n_states,
        n_actions,
        gamma,
        density,
        disabled_fraction,
    } = *opts;
    let mut b = MdpBuilder::new(n_states, n_actions, 0, gamma, 1.0);
    for s in 0..n_states {
        for a in 0..n_actions {
            if a > 0 && rng.gen::<f64>() < disabled_fraction {
                continue;
            }
            let mut weights: Vec<(usize, f64)> = Vec::new();
            for t in 0..n_states {
                if rng.gen::<f64>() < density {
                    weights.push((t, rng.gen_range(0.05..1.0)));
                }
            }
            if weights.is_empty() {
                weights.push((rng.gen_range(0..n_states), 1.0));
            }
            let total: f64 = weights.iter().map(|&(_, w)| w).sum();
            b.row(s, a, weights.into_iter().map(|(t, w)| (t, w / total)));
            b.reward(s, a, rng.gen_range(-1.0..=1.0));
        }
    }
    b.build().expect("random MDP is valid by construction")
}
