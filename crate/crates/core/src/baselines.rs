//! Reference schemes and the common dispatch used by the harness.
//!
//! * `FPA`: fixed half-wavelength planar array, inner loop only.
//! * `APS`: antenna-by-antenna search over a half-wavelength grid, starting
//!   from the fixed array.
//! * `MPZF`: swarm-optimized positions with zero-forcing combining at full
//!   power.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{Apv, Point, Scenario};
use crate::error::{Error, Result};
use crate::inner_loop::{bcd_solve, InnerSolution};
use crate::numerics::{CMatrix, RngStream};
use crate::power::PowerVector;
use crate::pso::{
    pso_optimize, violation_set_size, MmseBcd, PsoParams, RateOracle, SPACING_RELATIVE_TOLERANCE,
};
use crate::receiver::{sinr_report, zf_combiner, Combiner, CombinerKind, SinrReport};

/// Default cap on full APS passes over the antennas.
pub const APS_MAX_CYCLES: usize = 10;

/// An APS move must beat the current rate by more than this (relative) to
/// count, so round-off alone never moves an antenna.
const APS_IMPROVEMENT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "MA")]
    Ma,
    #[serde(rename = "FPA")]
    Fpa,
    #[serde(rename = "APS")]
    Aps,
    #[serde(rename = "MPZF")]
    Mpzf,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Ma, Scheme::Fpa, Scheme::Aps, Scheme::Mpzf];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Ma => "MA",
            Scheme::Fpa => "FPA",
            Scheme::Aps => "APS",
            Scheme::Mpzf => "MPZF",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown scheme `{s}` (expected MA, FPA, APS or MPZF)"
                ))
            })
    }
}

/// Half-wavelength planar array centered at the origin.
///
/// Uses `floor(√M)` rows and `ceil(M / rows)` columns; an incomplete last
/// row is left-aligned.
pub fn fpa_layout(m: usize, wavelength: f64, side: f64) -> Result<Apv> {
    if m == 0 {
        return Err(Error::config("number of antennas must be at least 1"));
    }
    let rows = (m as f64).sqrt().floor() as usize;
    let cols = m.div_ceil(rows);
    let spacing = wavelength / 2.0;
    let width = (cols - 1) as f64 * spacing;
    let height = (rows - 1) as f64 * spacing;
    if width.max(height) > side * (1.0 + SPACING_RELATIVE_TOLERANCE) {
        return Err(Error::RegionTooSmall {
            rows,
            cols,
            spacing,
            region: side,
        });
    }
    let half = side / 2.0;
    let positions = (0..m)
        .map(|idx| {
            let (r, c) = (idx / cols, idx % cols);
            let x = -width / 2.0 + c as f64 * spacing;
            let y = height / 2.0 - r as f64 * spacing;
            [x.clamp(-half, half), y.clamp(-half, half)]
        })
        .collect();
    Ok(Apv::new(positions))
}

/// Inner-loop solution at the fixed array.
pub fn fpa_evaluate(scenario: &Scenario) -> Result<(Apv, InnerSolution)> {
    let cfg = &scenario.config;
    let apv = fpa_layout(cfg.num_antennas, cfg.wavelength, cfg.region_side())?;
    let solution = bcd_solve(&apv, scenario)?;
    Ok((apv, solution))
}

/// Half-wavelength grid covering the square region, boundary included,
/// ordered row by row from the lower-left corner.
pub fn aps_grid(wavelength: f64, side: f64) -> Vec<Point> {
    let spacing = wavelength / 2.0;
    let half = side / 2.0;
    let n = (half / spacing + 1e-9).floor() as i64;
    let coord = |i: i64| (i as f64 * spacing).clamp(-half, half);
    (-n..=n)
        .flat_map(|iy| (-n..=n).map(move |ix| [coord(ix), coord(iy)]))
        .collect()
}

#[derive(Clone, Debug)]
pub struct ApsOutcome {
    pub apv: Apv,
    pub solution: InnerSolution,
    /// Full passes over the antennas, including the final one without moves.
    pub cycles: usize,
    pub evaluations: usize,
}

/// Alternating position selection: move one antenna at a time to the grid
/// point that maximizes the minimum rate, keeping the others fixed.
pub fn aps_optimize(scenario: &Scenario, max_cycles: usize) -> Result<ApsOutcome> {
    let cfg = &scenario.config;
    let d = cfg.min_distance();
    let threshold = d * (1.0 - SPACING_RELATIVE_TOLERANCE);
    let grid = aps_grid(cfg.wavelength, cfg.region_side());
    let (mut apv, mut solution) = fpa_evaluate(scenario)?;
    let mut evaluations = 1;
    let mut cycles = 0;

    while cycles < max_cycles {
        cycles += 1;
        let mut moved = false;
        for m in 0..apv.len() {
            let candidates: Vec<Point> = grid
                .iter()
                .copied()
                .filter(|&g| g != apv.positions[m])
                .filter(|g| {
                    apv.positions
                        .iter()
                        .enumerate()
                        .all(|(i, p)| i == m || (g[0] - p[0]).hypot(g[1] - p[1]) >= threshold)
                })
                .collect();
            let results: Vec<(Apv, InnerSolution)> = candidates
                .par_iter()
                .map(|&g| {
                    let mut trial = apv.clone();
                    trial.positions[m] = g;
                    bcd_solve(&trial, scenario).map(|s| (trial, s))
                })
                .collect::<Result<_>>()?;
            evaluations += results.len();

            let mut best: Option<(Apv, InnerSolution)> = None;
            let mut best_rate = solution.min_rate;
            for (trial, s) in results {
                let margin = APS_IMPROVEMENT_TOLERANCE * best_rate.abs().max(1.0);
                if s.min_rate > best_rate + margin {
                    best_rate = s.min_rate;
                    best = Some((trial, s));
                }
            }
            if let Some((trial, s)) = best {
                apv = trial;
                solution = s;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }

    Ok(ApsOutcome {
        apv,
        solution,
        cycles,
        evaluations,
    })
}

/// Zero-forcing combining with every user at full power. A rank-deficient
/// channel scores rate zero.
pub struct MaxPowerZf<'a> {
    pub scenario: &'a Scenario,
}

impl RateOracle for MaxPowerZf<'_> {
    fn solve(&self, apv: &Apv) -> Result<InnerSolution> {
        max_power_zf(
            self.scenario.channel_matrix(apv),
            self.scenario.pmax,
            self.scenario.sigma2,
        )
    }
}

/// Inner solution of the max-power zero-forcing receiver for channel `h`.
pub fn max_power_zf(h: CMatrix, pmax: f64, sigma2: f64) -> Result<InnerSolution> {
    let k = h.cols();
    let p = PowerVector::uniform(k, pmax);
    let (combiner, report) = match zf_combiner(&h) {
        Ok(w) => {
            let report = sinr_report(&w, &h, &p.0, sigma2)?;
            (w, report)
        }
        Err(Error::RankDeficient) => (
            Combiner {
                w: CMatrix::zeros(h.rows(), k),
                kind: CombinerKind::Zf,
            },
            SinrReport::from_gamma(vec![0.0; k]),
        ),
        Err(e) => return Err(e),
    };
    Ok(InnerSolution {
        combiner,
        p,
        min_rate: report.min_rate,
        trace: vec![report.min_rate],
        report,
        iterations: 0,
        hit_iteration_cap: false,
        channel: h,
    })
}

/// Swarm-optimized layout under the max-power zero-forcing receiver.
pub fn mpzf_optimize(
    scenario: &Scenario,
    params: &PsoParams,
    rng: &RngStream,
) -> Result<(Apv, InnerSolution)> {
    let out = pso_optimize(
        &scenario.config,
        params,
        &MaxPowerZf { scenario },
        scenario.sigma2,
        rng,
    )?;
    Ok((out.apv, out.solution))
}

/// Tunables shared by all schemes.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemeSettings {
    pub pso: PsoParams,
    pub aps_max_cycles: usize,
}

/// Result of running one scheme.
#[derive(Clone, Debug)]
pub struct SchemeOutcome {
    pub apv: Apv,
    /// Solution on the scenario the layout was optimized for.
    pub solution: InnerSolution,
    /// Spacing violations of the returned layout.
    pub violations: usize,
}

impl Scheme {
    /// Optimizes the layout (if the scheme moves antennas) for `scenario`.
    ///
    /// MA and MPZF draw from `rng`; FPA and APS are deterministic.
    pub fn optimize(
        self,
        scenario: &Scenario,
        settings: &SchemeSettings,
        rng: &RngStream,
    ) -> Result<SchemeOutcome> {
        let (apv, solution) = match self {
            Scheme::Ma => {
                let out = pso_optimize(
                    &scenario.config,
                    &settings.pso,
                    &MmseBcd { scenario },
                    scenario.sigma2,
                    rng,
                )?;
                (out.apv, out.solution)
            }
            Scheme::Fpa => fpa_evaluate(scenario)?,
            Scheme::Aps => {
                let out = aps_optimize(scenario, settings.aps_max_cycles)?;
                (out.apv, out.solution)
            }
            Scheme::Mpzf => mpzf_optimize(scenario, &settings.pso, rng)?,
        };
        let violations = violation_set_size(&apv, scenario.config.min_distance());
        Ok(SchemeOutcome {
            apv,
            solution,
            violations,
        })
    }

    /// Receiver/power policy of this scheme applied to a fixed layout.
    pub fn evaluate(self, apv: &Apv, scenario: &Scenario) -> Result<InnerSolution> {
        match self {
            Scheme::Mpzf => MaxPowerZf { scenario }.solve(apv),
            _ => bcd_solve(apv, scenario),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ScenarioConfig;
    use crate::numerics::{inner, norm_sqr};

    const LAMBDA: f64 = 0.1;

    #[test]
    fn fpa_square_layouts() {
        let apv = fpa_layout(4, LAMBDA, 0.3).unwrap();
        let mut pts = apv.positions.clone();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let e = 0.025;
        let expected = [[-e, -e], [-e, e], [e, -e], [e, e]];
        for (p, q) in pts.iter().zip(&expected) {
            assert!((p[0] - q[0]).abs() < 1e-15 && (p[1] - q[1]).abs() < 1e-15);
        }

        let apv = fpa_layout(16, LAMBDA, 0.3).unwrap();
        let xs: Vec<f64> = apv.positions.iter().map(|p| p[0]).collect();
        let span = xs.iter().cloned().fold(f64::MIN, f64::max)
            - xs.iter().cloned().fold(f64::MAX, f64::min);
        assert!((span - 0.15).abs() < 1e-12);
        assert!(apv.within_box(0.3));
        assert_eq!(violation_set_size(&apv, LAMBDA / 2.0), 0);
    }

    #[test]
    fn fpa_non_square_layouts() {
        let apv = fpa_layout(3, LAMBDA, 0.3).unwrap();
        assert!(apv.positions.iter().all(|p| p[1] == 0.0));
        assert_eq!(apv.positions[0][0], -0.05);

        // 6 antennas: 2 rows of 3; 7 antennas: 2 rows of 4 with 3 in the second row
        let apv = fpa_layout(7, LAMBDA, 0.3).unwrap();
        let second: Vec<Point> = apv.positions[4..].to_vec();
        assert_eq!(second.len(), 3);
        assert_eq!(second[0][0], apv.positions[0][0]);
        assert!(second.iter().all(|p| p[1] < apv.positions[0][1]));
    }

    #[test]
    fn fpa_rejects_small_region() {
        assert!(matches!(
            fpa_layout(16, LAMBDA, 0.1),
            Err(Error::RegionTooSmall { .. })
        ));
    }

    #[test]
    fn grid_has_seven_points_per_axis() {
        let side = 3.0 * LAMBDA;
        let grid = aps_grid(LAMBDA, side);
        assert_eq!(grid.len(), 49);
        assert!(Apv::new(grid.clone()).within_box(side));
        assert!(grid.contains(&[side / 2.0, -side / 2.0]));
    }

    fn scenario(cfg: ScenarioConfig, seed: u64) -> Scenario {
        Scenario::generate(&cfg, &RngStream::new(seed, 0)).unwrap()
    }

    #[test]
    fn aps_single_path_single_user_stays_put() {
        let cfg = ScenarioConfig {
            num_antennas: 1,
            num_users: 1,
            num_paths: 1,
            ..ScenarioConfig::desk()
        };
        let s = scenario(cfg, 1);
        let out = aps_optimize(&s, APS_MAX_CYCLES).unwrap();
        assert_eq!(out.cycles, 1);
        assert_eq!(out.apv, fpa_layout(1, LAMBDA, 0.3).unwrap());
    }

    #[test]
    fn aps_never_loses_to_fpa_and_keeps_spacing() {
        let cfg = ScenarioConfig {
            num_antennas: 4,
            num_users: 2,
            ..ScenarioConfig::desk()
        };
        for seed in 0..3 {
            let s = scenario(cfg.clone(), seed);
            let (_, fpa) = fpa_evaluate(&s).unwrap();
            let out = aps_optimize(&s, 2).unwrap();
            assert!(out.solution.min_rate >= fpa.min_rate);
            assert_eq!(violation_set_size(&out.apv, cfg.min_distance()), 0);
            assert!(out.cycles <= 2);
        }
    }

    #[test]
    fn zf_nulls_interference_at_full_power() {
        let cfg = ScenarioConfig::desk();
        let s = scenario(cfg.clone(), 2);
        let apv = fpa_layout(cfg.num_antennas, cfg.wavelength, cfg.region_side()).unwrap();
        let sol = MaxPowerZf { scenario: &s }.solve(&apv).unwrap();
        assert!(sol.p.0.iter().all(|&p| p == s.pmax));
        let h = &sol.channel;
        for k in 0..cfg.num_users {
            let wk = sol.combiner.w.col(k);
            for i in 0..cfg.num_users {
                if i != k {
                    let hi = h.col(i);
                    let rel = inner(&wk, &hi).norm() / (norm_sqr(&wk) * norm_sqr(&hi)).sqrt();
                    assert!(rel <= 1e-8);
                }
            }
        }
    }

    #[test]
    fn zf_rank_deficient_scores_zero() {
        let h = CMatrix::zeros(2, 2);
        let sol = max_power_zf(h, 0.01, 1e-11).unwrap();
        assert_eq!(sol.min_rate, 0.0);
    }

    #[test]
    fn zf_matches_mmse_for_single_user() {
        let cfg = ScenarioConfig {
            num_users: 1,
            ..ScenarioConfig::desk()
        };
        let s = scenario(cfg.clone(), 3);
        let apv = fpa_layout(cfg.num_antennas, cfg.wavelength, cfg.region_side()).unwrap();
        let zf = Scheme::Mpzf.evaluate(&apv, &s).unwrap();
        let ma = Scheme::Ma.evaluate(&apv, &s).unwrap();
        assert!((zf.min_rate - ma.min_rate).abs() <= 1e-9 * ma.min_rate);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.to_string().parse::<Scheme>().unwrap(), s);
            assert_eq!(s.as_str().to_lowercase().parse::<Scheme>().unwrap(), s);
        }
        assert!("XYZ".parse::<Scheme>().is_err());
        assert_eq!(serde_json::to_string(&Scheme::Mpzf).unwrap(), "\"MPZF\"");
    }
}
