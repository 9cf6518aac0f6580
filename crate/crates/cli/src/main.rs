use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ma_uplink::baselines::Scheme;
use ma_uplink::harness::{
    emit_convergence, emit_heatmap, emit_results, emit_summary, heatmap, run_convergence,
    run_experiment, run_fri_robustness, summarize, ExperimentSpec, OutputFormat, Profile, Sweep,
    SweepParam, TrialRecord,
};
use ma_uplink::{Error, Result};

const WORKERS_ENV: &str = "MA_MAXMIN_WORKERS";

/// Max-min rate optimization for a movable-antenna uplink receiver.
#[derive(Parser)]
#[command(name = "ma-maxmin", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML file with [scenario], [pso] and [experiment] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in defaults the config file is applied on top of.
    #[arg(long, global = true, default_value = "desk")]
    profile: String,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// csv or json; inferred from the --out extension when omitted.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Comma-separated subset of MA, FPA, APS, MPZF.
    #[arg(long, global = true, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    /// Worker threads (0 = all CPUs). Falls back to MA_MAXMIN_WORKERS.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Record wall-clock time per scheme run (output is then not reproducible).
    #[arg(long, global = true)]
    timing: bool,
    /// Also write per-group mean/std to this file.
    #[arg(long, global = true)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// One of M, K, L, A_over_lambda, pmax_dbm, mu, delta.
    #[arg(long)]
    param: Option<String>,
    /// Comma-separated values of the swept parameter.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment.
    Run,
    /// Compare schemes across values of one parameter.
    Sweep(SweepArgs),
    /// Global-best trace of the MA search on one realization.
    Convergence,
    /// Robustness to angle (mu) or path-gain (delta) estimation error.
    Fri(SweepArgs),
    /// Single-antenna channel gain over the region for every user.
    Heatmap {
        /// Grid points per axis.
        #[arg(long, default_value_t = 61)]
        resolution: usize,
    },
}

fn build_spec(common: &Common) -> Result<ExperimentSpec> {
    let profile: Profile = common.profile.parse()?;
    let mut spec = match &common.config {
        Some(path) => ExperimentSpec::from_toml_file(path, profile)?,
        None => ExperimentSpec::from_profile(profile),
    };
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    if let Some(trials) = common.trials {
        spec.trials = trials;
    }
    if let Some(list) = &common.schemes {
        spec.schemes = list
            .iter()
            .map(|s| s.parse::<Scheme>())
            .collect::<Result<_>>()?;
    }
    if common.timing {
        spec.record_timing = true;
    }
    Ok(spec)
}

fn apply_sweep(spec: &mut ExperimentSpec, args: &SweepArgs) -> Result<()> {
    match (&args.param, &args.values) {
        (Some(p), Some(v)) => {
            spec.sweep = Some(Sweep {
                param: p.parse::<SweepParam>()?,
                values: v.clone(),
            })
        }
        (None, None) => {}
        _ => return Err(Error::config("--param and --values must be given together")),
    }
    if spec.sweep.is_none() {
        return Err(Error::config(
            "no sweep given (use --param/--values or [experiment] sweep_param)",
        ));
    }
    Ok(())
}

fn workers(common: &Common) -> Result<usize> {
    if let Some(w) = common.workers {
        return Ok(w);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            Error::config(format!(
                "{WORKERS_ENV} must be a non-negative integer, got `{v}`"
            ))
        }),
        Err(_) => Ok(0),
    }
}

fn output_format(common: &Common) -> Result<OutputFormat> {
    if let Some(f) = &common.format {
        return f.parse();
    }
    let json = common
        .out
        .as_deref()
        .and_then(Path::extension)
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    Ok(if json {
        OutputFormat::Json
    } else {
        OutputFormat::Csv
    })
}

fn report(records: &[TrialRecord], common: &Common, format: OutputFormat) -> Result<()> {
    emit_results(records, common.out.as_deref(), format)?;
    let summary = summarize(records);
    if let Some(path) = &common.summary {
        emit_summary(&summary, Some(path), format)?;
    }
    for row in &summary {
        eprintln!(
            "{:<5} {}={:<8} n={:<5} mean={:.4} std={:.4} bps/Hz",
            row.scheme.as_str(),
            row.sweep_param,
            row.sweep_value,
            row.trials,
            row.mean_min_rate_bps_hz,
            row.std_min_rate_bps_hz
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    let mut spec = build_spec(common)?;
    let format = output_format(common)?;
    let workers = workers(common)?;
    match &cli.command {
        Command::Run => {
            let records = run_experiment(&spec, workers)?;
            report(&records, common, format)
        }
        Command::Sweep(args) => {
            apply_sweep(&mut spec, args)?;
            let records = run_experiment(&spec, workers)?;
            report(&records, common, format)
        }
        Command::Fri(args) => {
            apply_sweep(&mut spec, args)?;
            let records = run_fri_robustness(&spec, workers)?;
            report(&records, common, format)
        }
        Command::Convergence => {
            let rows = run_convergence(&spec)?;
            emit_convergence(&rows, common.out.as_deref(), format)
        }
        Command::Heatmap { resolution } => {
            let cells = heatmap(&spec, *resolution)?;
            emit_heatmap(&cells, common.out.as_deref(), format)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
