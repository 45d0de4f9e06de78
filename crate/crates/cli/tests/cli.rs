use std::path::Path;
use std::process::{Command, Output};

use spibb_core::experiment::{aggregate, parse_summary_csv, Method, RunResult, RunStatus};
use spibb_core::TabularMdp;

fn spibb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spibb")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = spibb(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn bounds_conversion_prints_reference_values() {
    let out = ok(&["bounds", "--states", "25", "--actions", "4", "--n-spibb", "100"]);
    assert_eq!(out, "n_spibb,n_2s,n_beta\n100,55,27\n");
}

#[test]
fn bounds_from_zeta_and_sweep() {
    let out = ok(&["bounds", "--states", "100", "--actions", "4", "--zeta", "0.1"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "n_spi,n_spibb,n_2s,n_beta");
    let v: Vec<u64> = lines[1].split(',').map(|x| x.parse().unwrap()).collect();
    assert!(v[3] <= v[2] && v[2] < v[1]);

    let out = ok(&["bounds", "--states", "1", "--actions", "4", "--zeta", "0.1", "--sweep-states", "10:50:10"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "states,n_spi,n_spibb,n_2s,n_beta");
    assert_eq!(lines.len(), 6);
    assert!(lines[5].starts_with("50,"));
}

#[test]
fn bounds_argument_errors() {
    assert!(!spibb(&["bounds", "--states", "5", "--actions", "2"]).status.success());
    assert!(!spibb(&["bounds", "--states", "5", "--actions", "2", "--zeta", "0.1", "--n-spibb", "3"]).status.success());
    assert!(!spibb(&["bounds", "--states", "5", "--actions", "2", "--n-spibb", "3", "--sweep-states", "1:2:1"]).status.success());
    assert!(!spibb(&["bounds", "--states", "5", "--actions", "2", "--zeta", "0.1", "--gamma", "1.5"]).status.success());
}

#[test]
fn env_build_and_transform() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = dir.path().join("grid.mdp");
    let mdp_s = mdp.to_str().unwrap();
    ok(&["env", "build", "gridworld", "--out", mdp_s]);
    let m = TabularMdp::from_text(&std::fs::read_to_string(&mdp).unwrap()).unwrap();
    assert_eq!((m.n_states(), m.n_actions()), (25, 4));

    let out = ok(&["transform", "verify", "--mdp", mdp_s]);
    assert!(out.ends_with("ok\n"), "{out}");
    let out = ok(&["transform", "verify", "--seed-random", "7"]);
    assert!(out.contains("states 8 -> "), "{out}");

    let two = dir.path().join("grid2s.mdp");
    ok(&["transform", "apply", "--mdp", mdp_s, "--out", two.to_str().unwrap(), "--descending"]);
    let t = TabularMdp::from_text(&std::fs::read_to_string(&two).unwrap()).unwrap();
    assert!(t.max_branching() <= 2);
    assert_eq!(t.n_actions(), 5);
    let sidecar = std::fs::read_to_string(dir.path().join("grid2s.mdp.aux")).unwrap();
    assert_eq!(sidecar.lines().count(), t.n_states() - 25);

    for name in ["wet_chicken", "resource_gathering"] {
        ok(&["env", "build", name, "--out", dir.path().join(name).to_str().unwrap()]);
    }
    assert!(!spibb(&["env", "build", "mountain_car", "--out", mdp_s]).status.success());
}

const TINY: &str = r#"
[experiment]
methods = ["behavior", "optimal", "basic_rl", "spibb", "spibb_2s", "spibb_beta"]
n_spibb = 10
dataset_sizes = [20, 200]
repeats = 4
base_seed = 9
episode_len = 50
out_dir = "unused"

[env]
name = "gridworld"

[behavior]
kind = "perturbed_optimal"
epsilon = 0.05
"#;

fn parse_raw(text: &str) -> Vec<RunResult> {
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "env,method,n_wedge,dataset_size,run,seed,status,perf");
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            RunResult {
                method: Method::parse(f[1]).unwrap(),
                n_wedge: f[2].parse().ok(),
                dataset_size: f[3].parse().unwrap(),
                run: f[4].parse().unwrap(),
                seed: f[5].parse().unwrap(),
                status: if f[6] == "ok" { RunStatus::Ok } else { RunStatus::Failed(f[6].into()) },
                perf: f[7].parse().unwrap(),
            }
        })
        .collect()
}

fn run_tiny(dir: &Path, workers: &str) -> (String, String) {
    let cfg = dir.join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let out = dir.join(format!("out{workers}"));
    ok(&["experiment", "run", "--config", cfg.to_str().unwrap(), "--workers", workers, "--out", out.to_str().unwrap()]);
    (
        std::fs::read_to_string(out.join("raw.csv")).unwrap(),
        std::fs::read_to_string(out.join("summary.csv")).unwrap(),
    )
}

#[test]
fn experiment_run_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let (raw, summary) = run_tiny(dir.path(), "1");
    let (raw8, _) = run_tiny(dir.path(), "8");
    assert_eq!(raw, raw8);
    assert!(dir.path().join("out1/gridworld.svg").exists());

    // The summary is a pure function of the raw runs.
    let results = parse_raw(&raw);
    assert_eq!(results.len(), 6 * 2 * 4);
    let expect = aggregate("gridworld", &results);
    let got = parse_summary_csv(&summary).unwrap();
    assert_eq!(got.len(), expect.len());
    for (g, e) in got.iter().zip(&expect) {
        assert_eq!((g.method, g.dataset_size, g.n_runs), (e.method, e.dataset_size, e.n_runs));
        for (x, y) in [(g.mean, e.mean), (g.cvar10, e.cvar10), (g.cvar1, e.cvar1)] {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    let plots = dir.path().join("plots");
    let summary_path = dir.path().join("out1/summary.csv");
    ok(&["experiment", "plot", "--in", summary_path.to_str().unwrap(), "--out", plots.to_str().unwrap()]);
    let svg = std::fs::read_to_string(plots.join("gridworld.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
}

#[test]
fn experiment_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, TINY.replace("repeats = 4", "repeats = 0")).unwrap();
    let out = spibb(&["experiment", "run", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}
