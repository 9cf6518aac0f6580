//! Alternating combiner / power optimization for a fixed antenna layout.
//!
//! Starting from full power, the loop alternates an MMSE combiner update
//! with a bisection power update until the minimum rate moves by less than
//! `ξ`. Each alternation costs one `M × M` Hermitian solve plus one
//! bisection, i.e. `O(M³ + K³ log₂ ε⁻¹)`.

use crate::channel::{Apv, Scenario};
use crate::error::Result;
use crate::numerics::CMatrix;
use crate::power::{bisection_power, PowerVector};
use crate::receiver::{mmse_combiner, sinr_report, Combiner, SinrReport};

#[derive(Clone, Debug)]
pub struct InnerSolution {
    pub combiner: Combiner,
    pub p: PowerVector,
    pub report: SinrReport,
    /// Minimum user rate of `(combiner, p)`, bps/Hz.
    pub min_rate: f64,
    /// Completed alternations.
    pub iterations: usize,
    /// Minimum rate after initialization and after each alternation.
    pub trace: Vec<f64>,
    pub hit_iteration_cap: bool,
    /// Channel matrix the solution was computed for.
    pub channel: CMatrix,
}

/// Thresholds of the alternating loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BcdSettings {
    pub epsilon: f64,
    pub xi: f64,
    pub max_iterations: usize,
}

impl BcdSettings {
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            epsilon: s.config.epsilon,
            xi: s.config.xi,
            max_iterations: s.config.max_bcd_iterations,
        }
    }
}

/// Solves the combiner/power subproblem at `apv` for `scenario`.
pub fn bcd_solve(apv: &Apv, scenario: &Scenario) -> Result<InnerSolution> {
    let h = scenario.channel_matrix(apv);
    bcd_solve_channel(
        h,
        scenario.pmax,
        scenario.sigma2,
        BcdSettings::from_scenario(scenario),
    )
}

/// Same as [`bcd_solve`] for an explicit channel matrix.
///
/// The returned iterate is the best one seen (later iterates win ties), so
/// the result never falls below the full-power initialization even though a
/// bisection step is only accurate to `ε`.
pub fn bcd_solve_channel(
    h: CMatrix,
    pmax: f64,
    sigma2: f64,
    settings: BcdSettings,
) -> Result<InnerSolution> {
    let k = h.cols();
    let mut p = PowerVector::uniform(k, pmax);
    let mut w = mmse_combiner(&h, &p.0, sigma2)?;
    let mut report = sinr_report(&w, &h, &p.0, sigma2)?;
    let mut trace = vec![report.min_rate];
    let mut best = (w.clone(), p.clone(), report.clone());
    let mut iterations = 0;
    let mut hit_iteration_cap = false;

    loop {
        let bisection = bisection_power(&h, &w, pmax, sigma2, settings.epsilon)?;
        p = bisection.p;
        w = mmse_combiner(&h, &p.0, sigma2)?;
        report = sinr_report(&w, &h, &p.0, sigma2)?;
        iterations += 1;
        let previous = *trace.last().expect("trace starts non-empty");
        trace.push(report.min_rate);
        if report.min_rate >= best.2.min_rate {
            best = (w.clone(), p.clone(), report.clone());
        }
        if (report.min_rate - previous).abs() < settings.xi {
            break;
        }
        if iterations >= settings.max_iterations {
            hit_iteration_cap = true;
            break;
        }
    }

    let (combiner, p, report) = best;
    Ok(InnerSolution {
        combiner,
        p,
        min_rate: report.min_rate,
        report,
        iterations,
        trace,
        hit_iteration_cap,
        channel: h,
    })
}
