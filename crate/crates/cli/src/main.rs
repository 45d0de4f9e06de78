use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spibb_core::bounds::{
    convert_nmin, nmin_2s, nmin_beta, nmin_spi, nmin_spibb, sweep_csv, sweep_states, BoundParams,
    ConversionTarget,
};
use spibb_core::envs::{build_env, EnvSpec};
use spibb_core::experiment::{
    aggregate, emit_outputs, parse_summary_csv, plot_summary, run_experiment, ExperimentConfig,
    RunStatus,
};
use spibb_core::mdp::{random_mdp, RandomMdpOptions};
use spibb_core::two_successor::{transform_mdp, verify_preservation, SuccessorOrder};
use spibb_core::{StochasticPolicy, TabularMdp};

#[derive(Parser)]
#[command(name = "spibb", version, about = "Safe policy improvement with baseline bootstrapping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample-count thresholds and conversions between bounds.
    Bounds(BoundsArgs),
    /// Run experiments or re-plot their summaries.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
    /// Two-successor transformation of MDP files.
    #[command(subcommand)]
    Transform(TransformCmd),
    /// Benchmark environments.
    #[command(subcommand)]
    Env(EnvCmd),
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("target").required(true).args(["zeta", "n_spibb"]))]
struct BoundsArgs {
    #[arg(long)]
    states: usize,
    #[arg(long)]
    actions: usize,
    #[arg(long, default_value_t = 1.0)]
    vmax: f64,
    #[arg(long, default_value_t = 0.95)]
    gamma: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0.0)]
    rho_tilde: f64,
    /// Admissible performance loss; prints all four thresholds.
    #[arg(long)]
    zeta: Option<f64>,
    /// SPIBB threshold to convert into 2s and beta thresholds.
    #[arg(long)]
    n_spibb: Option<u64>,
    /// `lo:hi:step` range of state counts; prints a CSV (needs --zeta).
    #[arg(long)]
    sweep_states: Option<String>,
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Run a config and write raw.csv, summary.csv and an SVG plot.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Output directory, overriding the config's `out_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render SVG plots from a summary.csv.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        /// Directory for the plots (defaults to the summary's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum TransformCmd {
    /// Check that the transformation preserves transition probabilities and performance.
    Verify {
        #[arg(long, required_unless_present = "seed_random", conflicts_with = "seed_random")]
        mdp: Option<PathBuf>,
        /// Verify on a random dense MDP generated from this seed instead of a file.
        #[arg(long)]
        seed_random: Option<u64>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Write the transformed MDP and its auxiliary-state sidecar (`<out>.aux`).
    Apply {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        descending: bool,
    },
}

#[derive(Subcommand)]
enum EnvCmd {
    /// Write an environment as an MDP file.
    Build {
        /// gridworld, wet_chicken or resource_gathering
        name: String,
        #[arg(long)]
        out: PathBuf,
        /// Environment spec file replacing the shipped constants.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
}

fn parse_range(s: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        bail!("expected lo:hi:step, got `{s}`");
    }
    let n = |p: &str| p.parse::<usize>().with_context(|| format!("bad number `{p}` in range"));
    Ok((n(parts[0])?, n(parts[1])?, n(parts[2])?))
}

fn bounds(a: BoundsArgs) -> Result<()> {
    let params = BoundParams::new(a.states, a.actions, a.vmax, a.gamma, a.delta).with_rho_tilde(a.rho_tilde);
    if let Some(range) = &a.sweep_states {
        let Some(zeta) = a.zeta else {
            bail!("--sweep-states needs --zeta");
        };
        let (lo, hi, step) = parse_range(range)?;
        print!("{}", sweep_csv(&sweep_states(&params, zeta, lo, hi, step)?));
    } else if let Some(zeta) = a.zeta {
        println!("n_spi,n_spibb,n_2s,n_beta");
        println!(
            "{},{},{},{}",
            nmin_spi(&params, zeta)?,
            nmin_spibb(&params, zeta)?,
            nmin_2s(&params, zeta)?,
            nmin_beta(&params, zeta)?
        );
    } else if let Some(n) = a.n_spibb {
        println!("n_spibb,n_2s,n_beta");
        println!(
            "{n},{},{}",
            convert_nmin(&params, n, ConversionTarget::TwoSuccessor)?,
            convert_nmin(&params, n, ConversionTarget::Beta)?
        );
    }
    Ok(())
}

fn experiment(cmd: ExperimentCmd) -> Result<()> {
    match cmd {
        ExperimentCmd::Run { config, workers, out } => {
            let cfg = ExperimentConfig::from_file(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let output = run_experiment(&cfg, workers)?;
            let summary = aggregate(&output.env, &output.results);
            let dir = out.unwrap_or_else(|| cfg.out_dir.clone());
            for path in emit_outputs(&output.env, &summary, &output.results, &dir)? {
                println!("wrote {}", path.display());
            }
            let failed = output
                .results
                .iter()
                .filter(|r| matches!(r.status, RunStatus::Failed(_)))
                .count();
            eprintln!(
                "n_2s = {}, n_beta = {}, behavior = {}, optimal = {}, failed runs = {failed}",
                output.n_2s, output.n_beta, output.behavior_perf, output.optimal_perf
            );
        }
        ExperimentCmd::Plot { input, out } => {
            let text = std::fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let rows = parse_summary_csv(&text)?;
            let dir = out.unwrap_or_else(|| {
                input.parent().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
            });
            std::fs::create_dir_all(&dir)?;
            for path in plot_summary(&rows, &dir)? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn read_mdp(path: &PathBuf) -> Result<TabularMdp> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(TabularMdp::from_text(&text)?)
}

fn transform(cmd: TransformCmd) -> Result<()> {
    match cmd {
        TransformCmd::Verify { mdp, seed_random, tol } => {
            let m = match (mdp, seed_random) {
                (Some(path), _) => read_mdp(&path)?,
                (None, Some(seed)) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    random_mdp(&mut rng, &RandomMdpOptions::dense(8, 3, 0.9))
                }
                (None, None) => unreachable!("clap requires one source"),
            };
            let t = transform_mdp(&m, SuccessorOrder::Ascending)?;
            let pi = StochasticPolicy::uniform(&m);
            let report = verify_preservation(&m, &t, &pi, tol);
            println!(
                "states {} -> {}, max_prob_gap {:e}, perf_gap {:e}",
                m.n_states(),
                t.mdp().n_states(),
                report.max_prob_gap,
                report.perf_gap
            );
            if !report.passed() {
                bail!("preservation check failed at tolerance {tol}");
            }
            println!("ok");
        }
        TransformCmd::Apply { mdp, out, descending } => {
            let m = read_mdp(&mdp)?;
            let order = if descending {
                SuccessorOrder::Descending
            } else {
                SuccessorOrder::Ascending
            };
            let t = transform_mdp(&m, order)?;
            std::fs::write(&out, t.mdp().to_text())?;
            let mut sidecar = out.clone().into_os_string();
            sidecar.push(".aux");
            std::fs::write(&sidecar, t.layout().sidecar_text())?;
            println!("wrote {} ({} states)", out.display(), t.mdp().n_states());
        }
    }
    Ok(())
}

fn env(cmd: EnvCmd) -> Result<()> {
    match cmd {
        EnvCmd::Build { name, out, spec } => {
            let spec = match spec {
                Some(path) => EnvSpec::from_toml(&std::fs::read_to_string(&path)?)?,
                None => EnvSpec::builtin(&name)?,
            };
            if spec.name() != name {
                bail!("spec file describes `{}`, not `{name}`", spec.name());
            }
            let m = build_env(&spec)?;
            std::fs::write(&out, m.to_text())?;
            println!("wrote {} ({} states, {} actions)", out.display(), m.n_states(), m.n_actions());
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Bounds(a) => bounds(a),
        Command::Experiment(c) => experiment(c),
        Command::Transform(c) => transform(c),
        Command::Env(c) => env(c),
    }
}
