//! Max-min transmit power control under a fixed combiner.
//!
//! At the optimum every user's SINR equals the common target `η`, which
//! turns the SINR constraints into the linear system `D(η) p = b`. A
//! bisection over `η` then finds the largest target whose solution stays
//! inside the power box. Each step costs one `K × K` solve, so the whole
//! search is `O(K³ log₂(η_max / ε))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{general_solve, norm_sqr, CMatrix, RMatrix};
use crate::receiver::{build_a_b, Combiner};

/// Negative powers down to this value (W) are treated as round-off.
pub const NEGATIVE_POWER_TOLERANCE: f64 = 1e-12;
const BOX_RELATIVE_SLACK: f64 = 1e-12;

/// Per-user transmit powers, W.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerVector(pub Vec<f64>);

impl PowerVector {
    pub fn uniform(k: usize, value: f64) -> Self {
        Self(vec![value; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn within_box(&self, pmax: f64) -> bool {
        self.0.iter().all(|&p| (0.0..=pmax).contains(&p))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BisectionStep {
    pub eta: f64,
    pub feasible: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BisectionResult {
    pub p: PowerVector,
    /// Common SINR achieved by `p` under the fixed combiner.
    pub eta: f64,
    pub iterations: usize,
    pub feasible: bool,
    /// Initial upper end of the search bracket.
    pub eta_max: f64,
    pub steps: Vec<BisectionStep>,
}

/// `D(η)`: diagonal `A_kk / η`, off-diagonal `−A_ki`.
pub fn build_d(a: &RMatrix, eta: f64) -> RMatrix {
    debug_assert!(eta > 0.0);
    RMatrix::from_fn(a.rows(), a.cols(), |k, i| {
        if k == i {
            a[(k, k)] / eta
        } else {
            -a[(k, i)]
        }
    })
}

/// Powers that give every user SINR exactly `η`, i.e. `D(η)⁻¹ b`.
///
/// Singular systems, non-finite solutions and clearly negative powers are
/// [`Error::Infeasible`]; tiny negative values are clamped to zero.
pub fn solve_power_for_eta(a: &RMatrix, b: &[f64], eta: f64) -> Result<PowerVector> {
    let d = build_d(a, eta);
    let mut p = match general_solve(&d, b) {
        Ok(p) => p,
        Err(Error::SingularMatrix { .. }) => return Err(Error::Infeasible { eta }),
        Err(e) => return Err(e),
    };
    if p.iter()
        .any(|v| !v.is_finite() || *v < -NEGATIVE_POWER_TOLERANCE)
    {
        return Err(Error::Infeasible { eta });
    }
    for v in &mut p {
        *v = v.max(0.0);
    }
    Ok(PowerVector(p))
}

/// Bisection on the common SINR target for a fixed combiner.
///
/// The bracket starts at `[0, p_max h_min / σ²]` with `h_min` the smallest
/// channel gain `‖h_k‖²`. The returned powers are those of the last feasible
/// midpoint, or all-zero (with `η = 0`) when no midpoint was feasible.
pub fn bisection_power(
    h: &CMatrix,
    w: &Combiner,
    pmax: f64,
    sigma2: f64,
    epsilon: f64,
) -> Result<BisectionResult> {
    let (a, b) = build_a_b(w, h, sigma2)?;
    let h_min = (0..h.cols())
        .map(|k| norm_sqr(&h.col(k)))
        .fold(f64::INFINITY, f64::min);
    Ok(bisect(&a, &b, pmax * h_min / sigma2, pmax, epsilon))
}

/// Bisection on a precomputed `(A, b)` pair with an explicit bracket top.
pub fn bisect(a: &RMatrix, b: &[f64], eta_max: f64, pmax: f64, epsilon: f64) -> BisectionResult {
    debug_assert!(epsilon > 0.0);
    let k = b.len();
    let mut lo = 0.0;
    let mut hi = eta_max;
    let mut best: Option<(PowerVector, f64)> = None;
    let mut steps = Vec::new();
    let limit = pmax * (1.0 + BOX_RELATIVE_SLACK);

    while hi - lo > epsilon {
        let eta = 0.5 * (lo + hi);
        let candidate = solve_power_for_eta(a, b, eta)
            .ok()
            .filter(|p| p.0.iter().all(|&v| v <= limit));
        let feasible = candidate.is_some();
        steps.push(BisectionStep { eta, feasible });
        match candidate {
            Some(mut p) => {
                for v in &mut p.0 {
                    *v = v.min(pmax);
                }
                best = Some((p, eta));
                lo = eta;
            }
            None => hi = eta,
        }
    }

    let (p, eta) = best.unwrap_or_else(|| (PowerVector::uniform(k, 0.0), 0.0));
    BisectionResult {
        feasible: p.within_box(pmax),
        p,
        eta,
        iterations: steps.len(),
        eta_max,
        steps,
    }
}
