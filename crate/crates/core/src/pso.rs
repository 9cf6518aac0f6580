//! Particle swarm search over antenna positions.
//!
//! Each particle is a flattened position vector `[x₁, y₁, …, x_M, y_M]`
//! inside the square region. Fitness is the inner-loop minimum rate minus a
//! penalty of `τ` per antenna pair closer than the minimum spacing, so with
//! `τ` above any achievable rate a violating layout never beats a feasible
//! one.
//!
//! Random draws come from streams split per `(particle)` at initialization
//! and per `(iteration, particle)` afterwards, so results do not depend on
//! evaluation order or thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{Apv, Scenario, ScenarioConfig};
use crate::error::{Error, Result};
use crate::inner_loop::{bcd_solve, InnerSolution};
use crate::numerics::{tag, RngStream};
use crate::receiver::{build_a_b, normalized_signal_interference};

/// Relative slack on the minimum spacing so that pairs placed exactly `D`
/// apart are not flagged through round-off.
pub const SPACING_RELATIVE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoParams {
    #[serde(rename = "N")]
    pub swarm_size: usize,
    #[serde(rename = "T")]
    pub iterations: usize,
    pub c1: f64,
    pub c2: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub tau: f64,
    /// Update every particle against the previous iteration's best instead
    /// of the running best.
    pub synchronous: bool,
    /// Draw the cognitive/social weights independently per coordinate. When
    /// false one pair is drawn per particle and iteration and applied to the
    /// whole position vector.
    pub per_coordinate_random: bool,
    /// Initial velocities are uniform on `±scale · A/2`.
    pub init_velocity_scale: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self::table1()
    }
}

impl PsoParams {
    pub fn table1() -> Self {
        Self {
            swarm_size: 200,
            iterations: 300,
            c1: 1.4,
            c2: 1.4,
            omega_min: 0.4,
            omega_max: 0.9,
            tau: 10.0,
            synchronous: false,
            per_coordinate_random: true,
            init_velocity_scale: 1.0,
        }
    }

    pub fn desk() -> Self {
        Self {
            swarm_size: 30,
            iterations: 80,
            ..Self::table1()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.swarm_size == 0 {
            return Err(Error::config("swarm size N must be at least 1"));
        }
        let finite = [
            self.c1,
            self.c2,
            self.omega_min,
            self.omega_max,
            self.tau,
            self.init_velocity_scale,
        ];
        if finite.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::config(
                "PSO coefficients must be finite and non-negative",
            ));
        }
        if self.omega_min > self.omega_max {
            return Err(Error::config("omega_min must not exceed omega_max"));
        }
        Ok(())
    }
}

/// Penalized fitness of one layout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitnessValue {
    pub value: f64,
    pub rate: f64,
    pub violations: usize,
}

/// Inner solver used as the fitness oracle.
pub trait RateOracle: Sync {
    fn solve(&self, apv: &Apv) -> Result<InnerSolution>;
}

/// MMSE combining with max-min power control.
pub struct MmseBcd<'a> {
    pub scenario: &'a Scenario,
}

impl RateOracle for MmseBcd<'_> {
    fn solve(&self, apv: &Apv) -> Result<InnerSolution> {
        bcd_solve(apv, self.scenario)
    }
}

/// `ω_max − (ω_max − ω_min)·t/T`; `T = 0` gives `ω_max`.
pub fn inertia_weight(t: usize, total: usize, omega_min: f64, omega_max: f64) -> f64 {
    if total == 0 {
        return omega_max;
    }
    omega_max - (omega_max - omega_min) * t as f64 / total as f64
}

/// Clamps every coordinate to `[−side/2, side/2]`.
pub fn project(r: &[f64], side: f64) -> Apv {
    Apv::from_flat(&clamp_flat(r, side))
}

fn clamp_flat(r: &[f64], side: f64) -> Vec<f64> {
    let half = side / 2.0;
    r.iter().map(|v| v.clamp(-half, half)).collect()
}

/// Number of unordered antenna pairs closer than `min_distance`.
pub fn violation_set_size(apv: &Apv, min_distance: f64) -> usize {
    let threshold = min_distance * (1.0 - SPACING_RELATIVE_TOLERANCE);
    let pos = &apv.positions;
    let mut count = 0;
    for m in 0..pos.len() {
        for i in (m + 1)..pos.len() {
            let dx = pos[m][0] - pos[i][0];
            let dy = pos[m][1] - pos[i][1];
            if dx.hypot(dy) < threshold {
                count += 1;
            }
        }
    }
    count
}

/// Rate minus `τ` per spacing violation, with the inner solution.
pub fn fitness<O: RateOracle + ?Sized>(
    apv: &Apv,
    oracle: &O,
    min_distance: f64,
    tau: f64,
) -> Result<(FitnessValue, InnerSolution)> {
    let solution = oracle.solve(apv)?;
    let violations = violation_set_size(apv, min_distance);
    let value = if violations == 0 {
        solution.min_rate
    } else {
        solution.min_rate - tau * violations as f64
    };
    let fit = FitnessValue {
        value,
        rate: solution.min_rate,
        violations,
    };
    Ok((fit, solution))
}

#[derive(Clone, Debug)]
pub struct SwarmState {
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub pbest_positions: Vec<Vec<f64>>,
    pub pbest_fitness: Vec<FitnessValue>,
    pub gbest_position: Vec<f64>,
    pub gbest_fitness: FitnessValue,
    pub gbest_solution: InnerSolution,
    /// Completed iterations.
    pub t: usize,
}

impl SwarmState {
    pub fn gbest_apv(&self) -> Apv {
        Apv::from_flat(&self.gbest_position)
    }

    fn offer_gbest(&mut self, n: usize, fit: FitnessValue, solution: InnerSolution) {
        if fit.value > self.gbest_fitness.value {
            self.gbest_position = self.positions[n].clone();
            self.gbest_fitness = fit;
            self.gbest_solution = solution;
        }
    }

    fn record(&mut self, n: usize, fit: FitnessValue, solution: InnerSolution) {
        if fit.value > self.pbest_fitness[n].value {
            self.pbest_positions[n] = self.positions[n].clone();
            self.pbest_fitness[n] = fit;
        }
        self.offer_gbest(n, fit, solution);
    }
}

fn evaluate_all<O: RateOracle + ?Sized>(
    positions: &[Vec<f64>],
    oracle: &O,
    min_distance: f64,
    tau: f64,
) -> Result<Vec<(FitnessValue, InnerSolution)>> {
    positions
        .par_iter()
        .map(|r| fitness(&Apv::from_flat(r), oracle, min_distance, tau))
        .collect()
}

/// Random initial swarm with evaluated personal and global bests.
pub fn init_swarm<O: RateOracle + ?Sized>(
    params: &PsoParams,
    cfg: &ScenarioConfig,
    oracle: &O,
    rng: &RngStream,
) -> Result<SwarmState> {
    let dim = 2 * cfg.num_antennas;
    let half = cfg.region_side() / 2.0;
    let vhalf = half * params.init_velocity_scale;
    let mut positions = Vec::with_capacity(params.swarm_size);
    let mut velocities = Vec::with_capacity(params.swarm_size);
    for n in 0..params.swarm_size {
        let mut s = rng.split(&[tag::PSO_INIT, n as u64]);
        positions.push((0..dim).map(|_| s.uniform(-half, half)).collect::<Vec<_>>());
        velocities.push(
            (0..dim)
                .map(|_| s.uniform(-vhalf, vhalf))
                .collect::<Vec<_>>(),
        );
    }

    let evaluated = evaluate_all(&positions, oracle, cfg.min_distance(), params.tau)?;
    let mut best = 0;
    for (n, (fit, _)) in evaluated.iter().enumerate() {
        if fit.value > evaluated[best].0.value {
            best = n;
        }
    }
    let pbest_fitness: Vec<FitnessValue> = evaluated.iter().map(|(f, _)| *f).collect();
    let (gbest_fitness, gbest_solution) = evaluated.into_iter().nth(best).expect("non-empty swarm");
    Ok(SwarmState {
        pbest_positions: positions.clone(),
        gbest_position: positions[best].clone(),
        positions,
        velocities,
        pbest_fitness,
        gbest_fitness,
        gbest_solution,
        t: 0,
    })
}

/// New `(velocity, position)` of particle `n` steering toward its personal
/// best and `gbest`.
pub fn update_particle(
    state: &SwarmState,
    n: usize,
    gbest: &[f64],
    omega: f64,
    params: &PsoParams,
    side: f64,
    rng: &mut RngStream,
) -> (Vec<f64>, Vec<f64>) {
    let r = &state.positions[n];
    let v = &state.velocities[n];
    let pbest = &state.pbest_positions[n];
    let dim = r.len();
    let (w1, w2): (Vec<f64>, Vec<f64>) = if params.per_coordinate_random {
        (0..dim)
            .map(|_| (rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)))
            .unzip()
    } else {
        let (a, b) = (rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0));
        (vec![a; dim], vec![b; dim])
    };
    let velocity: Vec<f64> = (0..dim)
        .map(|d| {
            omega * v[d]
                + params.c1 * w1[d] * (pbest[d] - r[d])
                + params.c2 * w2[d] * (gbest[d] - r[d])
        })
        .collect();
    let moved: Vec<f64> = r.iter().zip(&velocity).map(|(a, b)| a + b).collect();
    (velocity, clamp_flat(&moved, side))
}

/// Advances the swarm by one iteration.
pub fn step_swarm<O: RateOracle + ?Sized>(
    state: &mut SwarmState,
    params: &PsoParams,
    cfg: &ScenarioConfig,
    oracle: &O,
    rng: &RngStream,
) -> Result<()> {
    let t = state.t + 1;
    let omega = inertia_weight(t, params.iterations, params.omega_min, params.omega_max);
    let side = cfg.region_side();
    let d = cfg.min_distance();
    let stream = |n: usize| rng.split(&[tag::PSO_STEP, t as u64, n as u64]);

    if params.synchronous {
        let gbest = state.gbest_position.clone();
        for n in 0..state.positions.len() {
            let (v, r) = update_particle(state, n, &gbest, omega, params, side, &mut stream(n));
            state.velocities[n] = v;
            state.positions[n] = r;
        }
        let evaluated = evaluate_all(&state.positions, oracle, d, params.tau)?;
        for (n, (fit, solution)) in evaluated.into_iter().enumerate() {
            state.record(n, fit, solution);
        }
    } else {
        for n in 0..state.positions.len() {
            let gbest = state.gbest_position.clone();
            let (v, r) = update_particle(state, n, &gbest, omega, params, side, &mut stream(n));
            state.velocities[n] = v;
            state.positions[n] = r;
            let (fit, solution) =
                fitness(&Apv::from_flat(&state.positions[n]), oracle, d, params.tau)?;
            state.record(n, fit, solution);
        }
    }
    state.t = t;
    Ok(())
}

/// Global best after initialization or after one iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbestSnapshot {
    pub iteration: usize,
    pub fitness: f64,
    pub rate: f64,
    pub violations: usize,
    /// Mean over users of `p_k A_kk / b_k` at the global best.
    pub signal: f64,
    /// Mean over users of `Σ_{i≠k} p_i A_ki / b_k` at the global best.
    pub interference: f64,
}

fn snapshot(state: &SwarmState, sigma2: f64) -> GbestSnapshot {
    let sol = &state.gbest_solution;
    let (signal, interference) = build_a_b(&sol.combiner, &sol.channel, sigma2)
        .map(|(a, b)| normalized_signal_interference(&a, &b, &sol.p.0))
        .unwrap_or((0.0, 0.0));
    GbestSnapshot {
        iteration: state.t,
        fitness: state.gbest_fitness.value,
        rate: state.gbest_fitness.rate,
        violations: state.gbest_fitness.violations,
        signal,
        interference,
    }
}

#[derive(Clone, Debug)]
pub struct PsoOutcome {
    pub apv: Apv,
    pub fitness: FitnessValue,
    /// Inner solution recomputed at the returned layout.
    pub solution: InnerSolution,
    /// `T + 1` snapshots, starting with the initial swarm.
    pub history: Vec<GbestSnapshot>,
}

/// Runs the full search and returns the global best layout.
///
/// `sigma2` is only used for the signal/interference columns of the history.
pub fn pso_optimize<O: RateOracle + ?Sized>(
    cfg: &ScenarioConfig,
    params: &PsoParams,
    oracle: &O,
    sigma2: f64,
    rng: &RngStream,
) -> Result<PsoOutcome> {
    params.validate()?;
    let mut state = init_swarm(params, cfg, oracle, rng)?;
    let mut history = Vec::with_capacity(params.iterations + 1);
    history.push(snapshot(&state, sigma2));
    for _ in 0..params.iterations {
        step_swarm(&mut state, params, cfg, oracle, rng)?;
        history.push(snapshot(&state, sigma2));
    }
    let apv = state.gbest_apv();
    let solution = oracle.solve(&apv)?;
    Ok(PsoOutcome {
        apv,
        fitness: state.gbest_fitness,
        solution,
        history,
    })
}
