//! Monte Carlo experiments over the schemes, with CSV/JSON output.
//!
//! Every `(sweep value, trial)` pair draws one channel realization from the
//! stream `(seed, trial)` and runs all requested schemes on it, so scheme
//! comparisons are paired. Randomized optimizers draw from a stream derived
//! from the same pair, which makes output independent of the worker count.

mod config;
mod experiment;
mod output;

pub use config::{ExperimentSpec, Profile, Sweep, SweepParam};
pub use experiment::{
    heatmap, run_convergence, run_experiment, run_fri_robustness, run_trial, summarize,
    ConvergenceRow, HeatmapCell, SummaryRow, TrialRecord,
};
pub use output::{
    emit_convergence, emit_heatmap, emit_results, emit_summary, read_results, round_sig,
    OutputFormat, RESULTS_HEADER,
};
