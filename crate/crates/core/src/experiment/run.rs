use rayon::prelude::*;

use super::config::{ExperimentConfig, Method};
use crate::bounds::{convert_nmin, BoundParams, ConversionTarget};
use crate::data::{bootstrap_set, build_mle_mdp, count, sample_trajectories, transform_dataset, RewardModel};
use crate::envs::build_env;
use crate::error::{Error, Result};
use crate::mdp::{greedy_policy, performance, TabularMdp, DEFAULT_TOL};
use crate::policy::StochasticPolicy;
use crate::spibb::{basic_rl_policy, spibb_policy, SpibbProblem};
use crate::two_successor::{extend_policy_layout, restrict_policy, SuccessorOrder};

#[derive(Clone, Debug, PartialEq)]
pub enum RunStatus {
    Ok,
    Failed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub method: Method,
    /// Bootstrap threshold used by the SPIBB-family methods.
    pub n_wedge: Option<u64>,
    pub dataset_size: usize,
    pub run: usize,
    pub seed: u64,
    pub status: RunStatus,
    /// `ρ` of the learned policy on the true environment; NaN for failed runs.
    pub perf: f64,
}

/// Everything an experiment produces besides the raw results.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub env: String,
    pub n_2s: u64,
    pub n_beta: u64,
    pub behavior_perf: f64,
    pub optimal_perf: f64,
    pub results: Vec<RunResult>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Data-set seed of one `(size, run)` cell.
pub fn run_seed(base_seed: u64, dataset_size: usize, run: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(base_seed) ^ dataset_size as u64) ^ run as u64)
}

struct Shared<'a> {
    cfg: &'a ExperimentConfig,
    env: TabularMdp,
    pi_b: StochasticPolicy,
    n_2s: u64,
    n_beta: u64,
    behavior_perf: f64,
    optimal_perf: f64,
}

impl Shared<'_> {
    fn threshold(&self, m: Method) -> Option<u64> {
        match m {
            Method::Spibb => Some(self.cfg.n_spibb),
            Method::Spibb2s => Some(self.n_2s),
            Method::SpibbBeta => Some(self.n_beta),
            _ => None,
        }
    }

    fn run_cell(&self, dataset_size: usize, run: usize) -> Vec<RunResult> {
        let seed = run_seed(self.cfg.base_seed, dataset_size, run);
        let learned = self.learn(dataset_size, seed);
        self.cfg
            .methods
            .iter()
            .map(|&method| {
                let outcome = match method {
                    Method::Behavior => Ok(self.behavior_perf),
                    Method::Optimal => Ok(self.optimal_perf),
                    _ => learned
                        .as_ref()
                        .map_err(Clone::clone)
                        .and_then(|l| l.perf(method, self)),
                };
                let (status, perf) = match outcome {
                    Ok(p) => (RunStatus::Ok, p),
                    Err(e) => (RunStatus::Failed(e), f64::NAN),
                };
                RunResult {
                    method,
                    n_wedge: self.threshold(method),
                    dataset_size,
                    run,
                    seed,
                    status,
                    perf,
                }
            })
            .collect()
    }

    fn learn(&self, dataset_size: usize, seed: u64) -> std::result::Result<Learned, String> {
        let needs_data = self.cfg.methods.iter().any(|m| !m.is_reference());
        if !needs_data {
            return Err("no learning method selected".into());
        }
        let trajs = sample_trajectories(&self.env, &self.pi_b, dataset_size, self.cfg.episode_len, seed)
            .map_err(|e| e.to_string())?;
        let counts = count(&trajs, self.env.n_states(), self.env.n_actions());
        let mle = build_mle_mdp(&counts, &self.env, RewardModel::Known).map_err(|e| e.to_string())?;
        Ok(Learned { counts, mle })
    }
}

struct Learned {
    counts: crate::data::TransitionCounts,
    mle: TabularMdp,
}

impl Learned {
    fn policy(&self, method: Method, sh: &Shared) -> Result<StochasticPolicy> {
        match method {
            Method::BasicRl => basic_rl_policy(&self.mle),
            Method::Spibb => {
                let u = bootstrap_set(&self.counts, sh.cfg.n_spibb);
                spibb_policy(&SpibbProblem::new(&self.mle, &sh.pi_b, &u))
            }
            Method::Spibb2s | Method::SpibbBeta => {
                let n_wedge = sh.threshold(method).unwrap();
                let t = transform_dataset(&self.counts, SuccessorOrder::Ascending);
                let mle2 = t.mle_mdp(&sh.env)?;
                let pi_b2 = extend_policy_layout(&sh.pi_b, t.layout())?;
                let u = t.bootstrap_set(n_wedge);
                let pi = spibb_policy(&SpibbProblem::new(mle2.mdp(), &pi_b2, &u))?;
                restrict_policy(&pi, t.layout())
            }
            Method::Behavior | Method::Optimal => unreachable!("reference methods need no data"),
        }
    }

    fn perf(&self, method: Method, sh: &Shared) -> std::result::Result<f64, String> {
        self.policy(method, sh)
            .and_then(|pi| performance(&sh.env, &pi))
            .map_err(|e| e.to_string())
    }
}

/// Runs every `(dataset size, repeat)` cell on a pool of `workers` threads
/// (0 = one per core). Results are sorted by method, size and run, so the
/// output does not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let env = build_env(&cfg.env)?;
    let pi_b = cfg.behavior.build(&env)?;
    let params = BoundParams::new(env.n_states(), env.n_actions(), cfg.env.v_max(), cfg.env.gamma(), cfg.delta);
    let n_2s = convert_nmin(&params, cfg.n_spibb, ConversionTarget::TwoSuccessor)?;
    let n_beta = convert_nmin(&params, cfg.n_spibb, ConversionTarget::Beta)?;
    let behavior_perf = performance(&env, &pi_b)?;
    let optimal_perf = performance(&env, &greedy_policy(&env, DEFAULT_TOL)?)?;
    let shared = Shared {
        cfg,
        env,
        pi_b,
        n_2s,
        n_beta,
        behavior_perf,
        optimal_perf,
    };

    let cells: Vec<(usize, usize)> = cfg
        .dataset_sizes
        .iter()
        .flat_map(|&size| (0..cfg.repeats).map(move |run| (size, run)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let mut results: Vec<RunResult> = pool.install(|| {
        cells
            .par_iter()
            .flat_map_iter(|&(size, run)| shared.run_cell(size, run))
            .collect()
    });
    results.sort_by_key(|r| (r.method, r.dataset_size, r.run));
    Ok(ExperimentOutput {
        env: cfg.env.name().to_string(),
        n_2s,
        n_beta,
        behavior_perf,
        optimal_perf,
        results,
    })
}
