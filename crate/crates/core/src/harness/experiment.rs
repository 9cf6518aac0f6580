use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentSpec, SweepParam};
use crate::baselines::Scheme;
use crate::channel::{gain_map, perturb_fri, FriErrorModel, Scenario, ScenarioConfig};
use crate::error::{Error, Result};
use crate::numerics::{tag, RngStream};
use crate::pso::{pso_optimize, MmseBcd};

/// One scheme run on one channel realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub scheme: Scheme,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub trial: usize,
    pub seed: u64,
    /// Minimum user rate on the actual channel, bps/Hz.
    pub min_rate_bps_hz: f64,
    /// Combiner/power alternations of the evaluated solution (0 for MPZF).
    pub iterations: usize,
    /// Antenna pairs closer than the minimum spacing.
    pub violations: usize,
    /// Wall-clock time of the scheme run, or 0 when timing is disabled.
    pub wall_ms: f64,
    /// Fingerprint of the actual channel realization.
    #[serde(skip)]
    pub scenario_hash: u64,
}

/// Stream for everything random in trial `trial` of an experiment.
fn trial_stream(seed: u64, trial: usize) -> RngStream {
    RngStream::new(seed, 0).split(&[trial as u64])
}

/// Runs every scheme of `spec` on trial `trial` of one sweep point.
///
/// The layout is optimized on the estimated channel knowledge and the
/// reported rate is evaluated on the actual channel.
pub fn run_trial(
    spec: &ExperimentSpec,
    cfg: &ScenarioConfig,
    fri: &FriErrorModel,
    sweep_value: f64,
    trial: usize,
) -> Result<Vec<TrialRecord>> {
    let rng = trial_stream(spec.seed, trial);
    let actual = Scenario::generate(cfg, &rng)?;
    let estimated = if fri.is_exact() {
        actual.clone()
    } else {
        actual.with_users(perturb_fri(&actual.users, fri, &rng))
    };
    let optimizer_rng = rng.split(&[tag::PSO]);
    let settings = spec.settings();
    let scenario_hash = actual.fingerprint();

    spec.schemes
        .iter()
        .map(|&scheme| {
            let start = Instant::now();
            let outcome = scheme.optimize(&estimated, &settings, &optimizer_rng)?;
            let solution = if fri.is_exact() {
                outcome.solution
            } else {
                scheme.evaluate(&outcome.apv, &actual)?
            };
            let wall_ms = if spec.record_timing {
                start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            if solution.min_rate > spec.pso.tau {
                log::warn!(
                    "{scheme} trial {trial}: rate {:.3} exceeds penalty tau {}; spacing penalty may not dominate",
                    solution.min_rate,
                    spec.pso.tau
                );
            }
            if solution.hit_iteration_cap {
                log::warn!("{scheme} trial {trial}: combiner/power loop hit its iteration cap");
            }
            Ok(TrialRecord {
                scheme,
                sweep_param: spec.sweep_name().to_string(),
                sweep_value,
                trial,
                seed: spec.seed,
                min_rate_bps_hz: solution.min_rate,
                iterations: solution.iterations,
                violations: outcome.violations,
                wall_ms,
                scenario_hash,
            })
        })
        .collect()
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs all `(sweep value, trial)` pairs on `workers` threads (0 picks the
/// number of CPUs). Records are ordered by scheme (as listed in the spec),
/// sweep value (as listed) and trial, independent of scheduling.
pub fn run_experiment(spec: &ExperimentSpec, workers: usize) -> Result<Vec<TrialRecord>> {
    spec.validate()?;
    let points = spec.points()?;
    let units: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..spec.trials).map(move |t| (p, t)))
        .collect();
    let batches: Vec<(usize, Vec<TrialRecord>)> = with_pool(workers, || {
        units
            .par_iter()
            .map(|&(p, t)| {
                let (value, cfg, fri) = &points[p];
                run_trial(spec, cfg, fri, *value, t).map(|r| (p, r))
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let mut keyed: Vec<((usize, usize, usize), TrialRecord)> = batches
        .into_iter()
        .flat_map(|(p, records)| records.into_iter().map(move |r| (p, r)))
        .map(|(p, r)| {
            let s = spec
                .schemes
                .iter()
                .position(|&s| s == r.scheme)
                .expect("scheme from spec");
            ((s, p, r.trial), r)
        })
        .collect();
    keyed.sort_by_key(|(k, _)| *k);
    Ok(keyed.into_iter().map(|(_, r)| r).collect())
}

/// Channel-knowledge robustness sweep: exactly one of `mu`, `delta` is swept
/// and the other must be zero.
pub fn run_fri_robustness(spec: &ExperimentSpec, workers: usize) -> Result<Vec<TrialRecord>> {
    let ok = match spec.sweep.as_ref().map(|s| s.param) {
        Some(SweepParam::Mu) => spec.fri.delta == 0.0,
        Some(SweepParam::Delta) => spec.fri.mu == 0.0,
        _ => false,
    };
    if !ok {
        return Err(Error::config(
            "robustness runs sweep exactly one of mu or delta with the other set to 0",
        ));
    }
    run_experiment(spec, workers)
}

/// Global best of the MA search after each iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub iteration: usize,
    pub gbest_fitness: f64,
    pub gbest_rate_bps_hz: f64,
    pub gbest_violations: usize,
    /// Mean noise-normalized signal power at the global best.
    pub signal_norm: f64,
    /// Mean noise-normalized interference power at the global best.
    pub interference_norm: f64,
}

/// Convergence trace of the MA search on the first trial's realization.
pub fn run_convergence(spec: &ExperimentSpec) -> Result<Vec<ConvergenceRow>> {
    spec.pso.validate()?;
    let rng = trial_stream(spec.seed, 0);
    let scenario = Scenario::generate(&spec.scenario, &rng)?;
    let out = pso_optimize(
        &scenario.config,
        &spec.pso,
        &MmseBcd {
            scenario: &scenario,
        },
        scenario.sigma2,
        &rng.split(&[tag::PSO]),
    )?;
    Ok(out
        .history
        .iter()
        .map(|h| ConvergenceRow {
            iteration: h.iteration,
            gbest_fitness: h.fitness,
            gbest_rate_bps_hz: h.rate,
            gbest_violations: h.violations,
            signal_norm: h.signal,
            interference_norm: h.interference,
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub user: usize,
    pub x_m: f64,
    pub y_m: f64,
    pub gain_db: f64,
}

/// Single-antenna channel gain of every user over an `n × n` grid of the
/// region, for the first trial's realization.
pub fn heatmap(spec: &ExperimentSpec, n: usize) -> Result<Vec<HeatmapCell>> {
    if n == 0 {
        return Err(Error::config("heatmap resolution must be at least 1"));
    }
    let scenario = Scenario::generate(&spec.scenario, &trial_stream(spec.seed, 0))?;
    let cfg = &scenario.config;
    Ok(scenario
        .users
        .iter()
        .enumerate()
        .flat_map(|(k, u)| {
            gain_map(u, cfg.wavelength, cfg.region_side(), n)
                .into_iter()
                .map(move |(x, y, g)| HeatmapCell {
                    user: k,
                    x_m: x,
                    y_m: y,
                    gain_db: g,
                })
        })
        .collect())
}

/// Mean and sample standard deviation of the minimum rate per scheme and
/// sweep value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scheme: Scheme,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub trials: usize,
    pub mean_min_rate_bps_hz: f64,
    pub std_min_rate_bps_hz: f64,
}

/// Groups consecutive records with equal `(scheme, sweep value)`, which is
/// every group when the input comes from [`run_experiment`].
pub fn summarize(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < records.len() {
        let head = &records[start];
        let end = records[start..]
            .iter()
            .position(|r| {
                r.scheme != head.scheme || r.sweep_value.to_bits() != head.sweep_value.to_bits()
            })
            .map_or(records.len(), |o| start + o);
        let rates: Vec<f64> = records[start..end]
            .iter()
            .map(|r| r.min_rate_bps_hz)
            .collect();
        let n = rates.len() as f64;
        let mean = rates.iter().sum::<f64>() / n;
        let std = if rates.len() > 1 {
            (rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        out.push(SummaryRow {
            scheme: head.scheme,
            sweep_param: head.sweep_param.clone(),
            sweep_value: head.sweep_value,
            trials: rates.len(),
            mean_min_rate_bps_hz: mean,
            std_min_rate_bps_hz: std,
        });
        start = end;
    }
    out
}
