//! Repeated offline-learning runs over a grid of data-set sizes, with mean and
//! CVaR aggregation and CSV / SVG output.

mod config;
mod output;
mod run;

pub use config::{BehaviorSource, ExperimentConfig, Method};
pub use output::{
    aggregate, cvar, emit_outputs, parse_summary_csv, plot_summary, raw_csv, render_svg,
    summary_csv, SummaryRow, RAW_HEADER, SUMMARY_HEADER,
};
pub use run::{run_experiment, run_seed, ExperimentOutput, RunResult, RunStatus};
