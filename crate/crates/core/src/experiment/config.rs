use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envs::{behavior_perturbed_optimal, behavior_softmax_q, EnvSpec};
use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use crate::policy::StochasticPolicy;

/// Learning methods and reference policies compared in an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Behavior,
    Optimal,
    BasicRl,
    Spibb,
    #[serde(rename = "spibb_2s")]
    Spibb2s,
    SpibbBeta,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Behavior,
        Method::Optimal,
        Method::BasicRl,
        Method::Spibb,
        Method::Spibb2s,
        Method::SpibbBeta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Behavior => "behavior",
            Method::Optimal => "optimal",
            Method::BasicRl => "basic_rl",
            Method::Spibb => "spibb",
            Method::Spibb2s => "spibb_2s",
            Method::SpibbBeta => "spibb_beta",
        }
    }

    pub fn parse(name: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Reference policies do not depend on the data set.
    pub fn is_reference(self) -> bool {
        matches!(self, Method::Behavior | Method::Optimal)
    }
}

/// Where the behavior policy comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BehaviorSource {
    SoftmaxQ {
        q_steps: usize,
        lr: f64,
        temp: f64,
        seed: u64,
    },
    PerturbedOptimal {
        epsilon: f64,
    },
    /// Policy file in the `p <s> <a> <prob>` line format.
    File {
        path: PathBuf,
    },
}

impl BehaviorSource {
    pub fn build(&self, mdp: &TabularMdp) -> Result<StochasticPolicy> {
        let pi = match self {
            BehaviorSource::SoftmaxQ {
                q_steps,
                lr,
                temp,
                seed,
            } => behavior_softmax_q(mdp, *q_steps, *lr, *temp, *seed)?,
            BehaviorSource::PerturbedOptimal { epsilon } => behavior_perturbed_optimal(mdp, *epsilon)?,
            BehaviorSource::File { path } => {
                let text = std::fs::read_to_string(path)?;
                StochasticPolicy::from_text(&text, mdp.n_states(), mdp.n_actions())?
            }
        };
        pi.validate_for(mdp)?;
        Ok(pi)
    }
}

fn default_repeats() -> usize {
    1000
}

fn default_episode_len() -> usize {
    200
}

fn default_delta() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    methods: Vec<Method>,
    n_spibb: u64,
    #[serde(default = "default_delta")]
    delta: f64,
    dataset_sizes: Vec<usize>,
    #[serde(default = "default_repeats")]
    repeats: usize,
    base_seed: u64,
    #[serde(default = "default_episode_len")]
    episode_len: usize,
    out_dir: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    experiment: ExperimentSection,
    env: toml::Table,
    behavior: BehaviorSource,
}

/// One experiment: an environment, a behavior policy, the methods to compare
/// and the data-set grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub behavior: BehaviorSource,
    pub methods: Vec<Method>,
    pub n_spibb: u64,
    pub delta: f64,
    pub dataset_sizes: Vec<usize>,
    pub repeats: usize,
    pub base_seed: u64,
    pub episode_len: usize,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    /// Parses the `[experiment]`, `[env]` and `[behavior]` sections. An `[env]`
    /// table holding only `name` selects the shipped spec of that environment.
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let env = match (file.env.len(), file.env.get("name").and_then(|v| v.as_str())) {
            (1, Some(name)) => EnvSpec::builtin(name)?,
            _ => EnvSpec::deserialize(file.env).map_err(|e| Error::Config(e.to_string()))?,
        };
        let e = file.experiment;
        let cfg = ExperimentConfig {
            env,
            behavior: file.behavior,
            methods: e.methods,
            n_spibb: e.n_spibb,
            delta: e.delta,
            dataset_sizes: e.dataset_sizes,
            repeats: e.repeats,
            base_seed: e.base_seed,
            episode_len: e.episode_len,
            out_dir: e.out_dir,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.methods.is_empty() {
            return bad("no methods selected");
        }
        if self.repeats == 0 {
            return bad("repeats must be ≥ 1");
        }
        if self.n_spibb == 0 {
            return bad("n_spibb must be ≥ 1");
        }
        if self.episode_len == 0 {
            return bad("episode_len must be ≥ 1");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        if self.dataset_sizes.is_empty()
            || self.dataset_sizes[0] == 0
            || self.dataset_sizes.windows(2).any(|w| w[0] >= w[1])
        {
            return bad("dataset_sizes must be positive and strictly ascending");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[experiment]
methods = ["behavior", "spibb", "spibb_2s"]
n_spibb = 100
dataset_sizes = [10, 100]
base_seed = 3
out_dir = "out"

[env]
name = "gridworld"

[behavior]
kind = "perturbed_optimal"
epsilon = 0.01
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.env, EnvSpec::builtin("gridworld").unwrap());
        assert_eq!(cfg.methods, vec![Method::Behavior, Method::Spibb, Method::Spibb2s]);
        assert_eq!(cfg.repeats, 1000);
        assert_eq!(cfg.episode_len, 200);
        assert_eq!(cfg.delta, 0.1);
    }

    #[test]
    fn inline_env_parameters() {
        let text = SAMPLE.replace(
            "name = \"gridworld\"",
            "name = \"gridworld\"\nsize = 3\nintended_prob = 1.0\ngoal_reward = 1.0\ngamma = 0.9",
        );
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        match cfg.env {
            EnvSpec::Gridworld(p) => assert_eq!(p.size, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_configs() {
        for (from, to) in [
            ("dataset_sizes = [10, 100]", "dataset_sizes = [100, 10]"),
            ("n_spibb = 100", "n_spibb = 0"),
            ("base_seed = 3", "base_seed = 3\nrepeats = 0"),
            ("\"spibb\"", "\"spibb_gamma\""),
            ("epsilon = 0.01", "epsilon = 0.01\nextra = 1"),
        ] {
            assert!(ExperimentConfig::from_toml(&SAMPLE.replace(from, to)).is_err(), "{to}");
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.name()), Some(m));
        }
    }
}
