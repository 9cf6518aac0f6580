//! Linear receive combining and SINR evaluation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{hermitian_solve, inner, norm_sqr, CMatrix, RMatrix};

/// SINR values above this are reported as this value.
pub const SINR_CAP: f64 = 1e30;
const DENOMINATOR_FLOOR: f64 = 1e-30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CombinerKind {
    Mmse,
    Zf,
}

/// `M × K` combining matrix; column `k` is applied to user `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Combiner {
    pub w: CMatrix,
    pub kind: CombinerKind,
}

impl Combiner {
    pub fn num_users(&self) -> usize {
        self.w.cols()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinrReport {
    /// Linear SINR per user.
    pub gamma: Vec<f64>,
    /// `log2(1 + γ)` per user, bps/Hz.
    pub rates: Vec<f64>,
    pub min_rate: f64,
}

impl SinrReport {
    pub fn from_gamma(gamma: Vec<f64>) -> Self {
        let rates: Vec<f64> = gamma.iter().map(|g| (1.0 + g).log2()).collect();
        let min_rate = rates.iter().copied().fold(f64::INFINITY, f64::min);
        Self {
            gamma,
            rates,
            min_rate,
        }
    }

    pub fn min_sinr(&self) -> f64 {
        self.gamma.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn guarded_ratio(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        0.0
    } else if den < DENOMINATOR_FLOOR {
        SINR_CAP
    } else {
        (num / den).min(SINR_CAP)
    }
}

fn check_dims(w: &CMatrix, h: &CMatrix, p: Option<&[f64]>) -> Result<()> {
    if w.rows() != h.rows() || w.cols() != h.cols() {
        return Err(Error::dims(
            format!("{}x{}", h.rows(), h.cols()),
            format!("{}x{}", w.rows(), w.cols()),
        ));
    }
    if let Some(p) = p {
        if p.len() != h.cols() {
            return Err(Error::dims(h.cols(), p.len()));
        }
    }
    Ok(())
}

/// `H diag(p) Hᴴ + σ² I`.
fn received_covariance(h: &CMatrix, p: &[f64], sigma2: f64) -> CMatrix {
    let m = h.rows();
    let mut r = CMatrix::zeros(m, m);
    for i in 0..m {
        let hi = h.row(i);
        for j in 0..=i {
            let hj = h.row(j);
            let v: Complex64 = hi
                .iter()
                .zip(hj)
                .zip(p)
                .map(|((a, b), &pk)| a * b.conj() * pk)
                .sum();
            r[(i, j)] = v;
            r[(j, i)] = v.conj();
        }
        r[(i, i)] += sigma2;
    }
    r
}

/// MMSE combiner `(H P Hᴴ + σ² I)⁻¹ H`, computed as a Hermitian solve.
pub fn mmse_combiner(h: &CMatrix, p: &[f64], sigma2: f64) -> Result<Combiner> {
    if p.len() != h.cols() {
        return Err(Error::dims(h.cols(), p.len()));
    }
    let r = received_covariance(h, p, sigma2);
    let w = hermitian_solve(&r, h)?;
    Ok(Combiner {
        w,
        kind: CombinerKind::Mmse,
    })
}

/// Zero-forcing combiner `H (Hᴴ H)⁻¹`, so that `Wᴴ H = I`.
pub fn zf_combiner(h: &CMatrix) -> Result<Combiner> {
    if h.cols() > h.rows() {
        return Err(Error::RankDeficient);
    }
    let ha = h.adjoint();
    let gram = ha.matmul(h)?;
    let x = hermitian_solve(&gram, &ha).map_err(|e| match e {
        Error::SingularMatrix { .. } => Error::RankDeficient,
        other => other,
    })?;
    Ok(Combiner {
        w: x.adjoint(),
        kind: CombinerKind::Zf,
    })
}

/// Per-user SINR, rate and minimum rate for combiner `W` and powers `p`.
pub fn sinr_report(w: &Combiner, h: &CMatrix, p: &[f64], sigma2: f64) -> Result<SinrReport> {
    check_dims(&w.w, h, Some(p))?;
    let hcols = h.columns();
    let gamma = (0..h.cols())
        .map(|k| {
            let wk = w.w.col(k);
            let mut signal = 0.0;
            let mut interference = 0.0;
            for (i, hi) in hcols.iter().enumerate() {
                let g = inner(&wk, hi).norm_sqr() * p[i];
                if i == k {
                    signal = g;
                } else {
                    interference += g;
                }
            }
            guarded_ratio(signal, interference + norm_sqr(&wk) * sigma2)
        })
        .collect();
    Ok(SinrReport::from_gamma(gamma))
}

/// Coupling matrix `A[k][i] = |w_kᴴ h_i|²` and noise vector `b[k] = ‖w_k‖² σ²`
/// for an arbitrary combiner.
pub fn build_a_b(w: &Combiner, h: &CMatrix, sigma2: f64) -> Result<(RMatrix, Vec<f64>)> {
    check_dims(&w.w, h, None)?;
    let k = h.cols();
    let hcols = h.columns();
    let mut a = RMatrix::zeros(k, k);
    let mut b = Vec::with_capacity(k);
    for row in 0..k {
        let wk = w.w.col(row);
        let nw = norm_sqr(&wk);
        if nw == 0.0 {
            return Err(Error::DegenerateCombiner { user: row });
        }
        for (i, hi) in hcols.iter().enumerate() {
            a[(row, i)] = inner(&wk, hi).norm_sqr();
        }
        b.push(nw * sigma2);
    }
    Ok((a, b))
}

/// SINR from the `(A, b)` form: `p_k A_kk / (Σ_{i≠k} p_i A_ki + b_k)`.
pub fn sinr_from_a_b(a: &RMatrix, b: &[f64], p: &[f64]) -> Vec<f64> {
    (0..b.len())
        .map(|k| {
            let interference: f64 = (0..b.len())
                .filter(|&i| i != k)
                .map(|i| p[i] * a[(k, i)])
                .sum();
            guarded_ratio(p[k] * a[(k, k)], interference + b[k])
        })
        .collect()
}

/// Mean over users of the noise-normalized signal power `p_k A_kk / b_k` and
/// interference power `Σ_{i≠k} p_i A_ki / b_k`.
pub fn normalized_signal_interference(a: &RMatrix, b: &[f64], p: &[f64]) -> (f64, f64) {
    let k = b.len();
    let mut s = 0.0;
    let mut i_sum = 0.0;
    for row in 0..k {
        s += p[row] * a[(row, row)] / b[row];
        i_sum += (0..k)
            .filter(|&i| i != row)
            .map(|i| p[i] * a[(row, i)])
            .sum::<f64>()
            / b[row];
    }
    (s / k as f64, i_sum / k as f64)
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    fn random_h(rng: &mut RngStream, m: usize, k: usize, var: f64) -> CMatrix {
        CMatrix::from_fn(m, k, |_, _| rng.cscg(var))
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn mmse_single_user_is_matched_filter_direction() {
        let mut rng = RngStream::new(1, 0);
        let h = random_h(&mut rng, 5, 1, 1e-9);
        let w = mmse_combiner(&h, &[0.01], 1e-11).unwrap();
        let (wc, hc) = (w.w.col(0), h.col(0));
        let cos = inner(&wc, &hc).norm() / (norm_sqr(&wc) * norm_sqr(&hc)).sqrt();
        let angle = cos.min(1.0).acos();
        assert!(angle < 1e-8, "angle {angle}");
    }

    #[test]
    fn mmse_zero_power_is_scaled_channel() {
        let mut rng = RngStream::new(2, 0);
        let h = random_h(&mut rng, 4, 3, 1.0);
        let w = mmse_combiner(&h, &[0.0; 3], 0.5).unwrap();
        let expected = h.scale(c(2.0, 0.0));
        assert!(w.w.sub(&expected).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn mmse_maximizes_each_users_sinr() {
        for seed in 0..100 {
            let mut rng = RngStream::new(3, seed);
            let h = random_h(&mut rng, 4, 3, 1.0);
            let p: Vec<f64> = (0..3).map(|_| rng.uniform(0.1, 1.0)).collect();
            let sigma2 = 0.3;
            let w = mmse_combiner(&h, &p, sigma2).unwrap();
            let best = sinr_report(&w, &h, &p, sigma2).unwrap();
            let wnorm = w.w.frobenius_norm();
            for _ in 0..100 {
                let pert = CMatrix::from_fn(4, 3, |_, _| rng.cscg(1.0));
                let scale = 0.1 * wnorm / pert.frobenius_norm();
                let other = Combiner {
                    w: w.w.add(&pert.scale(c(scale, 0.0))).unwrap(),
                    kind: CombinerKind::Mmse,
                };
                let r = sinr_report(&other, &h, &p, sigma2).unwrap();
                for k in 0..3 {
                    assert!(best.gamma[k] >= r.gamma[k] * (1.0 - 1e-12));
                }
            }
        }
    }

    #[test]
    fn zf_orthonormal_columns_returns_channel() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = CMatrix::from_row_major(
            3,
            2,
            vec![
                c(s, 0.0),
                c(0.0, s),
                c(s, 0.0),
                c(0.0, -s),
                c(0.0, 0.0),
                c(0.0, 0.0),
            ],
        )
        .unwrap();
        let w = zf_combiner(&h).unwrap();
        assert!(w.w.sub(&h).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn zf_nulls_interference() {
        for seed in 0..50 {
            let mut rng = RngStream::new(4, seed);
            let h = random_h(&mut rng, 6, 4, 1e-8);
            let w = zf_combiner(&h).unwrap();
            let g = w.w.adjoint().matmul(&h).unwrap();
            assert!(g.sub(&CMatrix::identity(4)).unwrap().max_abs() < 1e-8);
            for k in 0..4 {
                for i in 0..4 {
                    if i != k {
                        let wk = w.w.col(k);
                        let hi = h.col(i);
                        let leak = inner(&wk, &hi).norm() / (norm_sqr(&wk) * norm_sqr(&hi)).sqrt();
                        assert!(leak <= 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn zf_matches_normal_equations_oracle() {
        let mut rng = RngStream::new(5, 0);
        let h = random_h(&mut rng, 3, 2, 1.0);
        let g = h.adjoint().matmul(&h).unwrap();
        let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
        let inv = CMatrix::from_row_major(
            2,
            2,
            vec![
                g[(1, 1)] / det,
                -g[(0, 1)] / det,
                -g[(1, 0)] / det,
                g[(0, 0)] / det,
            ],
        )
        .unwrap();
        let oracle = h.matmul(&inv).unwrap();
        let w = zf_combiner(&h).unwrap();
        assert!(w.w.sub(&oracle).unwrap().max_abs() <= 1e-9 * oracle.max_abs());
    }

    #[test]
    fn zf_rank_deficient() {
        let col = vec![c(1.0, 0.0), c(0.0, 1.0), c(2.0, 0.0)];
        let h = CMatrix::from_columns(&[col.clone(), col]).unwrap();
        assert!(matches!(zf_combiner(&h), Err(Error::RankDeficient)));
    }

    #[test]
    fn sinr_zero_power() {
        let mut rng = RngStream::new(6, 0);
        let h = random_h(&mut rng, 4, 3, 1.0);
        let w = mmse_combiner(&h, &[1.0; 3], 1.0).unwrap();
        let r = sinr_report(&w, &h, &[0.0; 3], 1.0).unwrap();
        assert!(r.gamma.iter().all(|&g| g == 0.0));
        assert!(r.rates.iter().all(|&x| x == 0.0));
        assert_eq!(r.min_rate, 0.0);
    }

    #[test]
    fn sinr_single_user_matched_filter() {
        let mut rng = RngStream::new(7, 0);
        let h = random_h(&mut rng, 4, 1, 1.0);
        let w = Combiner {
            w: h.clone(),
            kind: CombinerKind::Mmse,
        };
        let r = sinr_report(&w, &h, &[2.0], 0.5).unwrap();
        let expected = 2.0 * norm_sqr(&h.col(0)) / 0.5;
        assert!((r.gamma[0] - expected).abs() <= 1e-12 * expected);
        assert!((r.min_rate - (1.0 + expected).log2()).abs() < 1e-12);
    }

    #[test]
    fn sinr_under_zf_has_no_interference_term() {
        let mut rng = RngStream::new(8, 0);
        let h = random_h(&mut rng, 5, 3, 1.0);
        let w = zf_combiner(&h).unwrap();
        let p = [0.3, 0.7, 1.1];
        let r = sinr_report(&w, &h, &p, 0.2).unwrap();
        for k in 0..3 {
            let expected = p[k] / (norm_sqr(&w.w.col(k)) * 0.2);
            assert!((r.gamma[k] - expected).abs() <= 1e-6 * expected);
        }
    }

    #[test]
    fn a_diagonal_for_orthogonal_columns() {
        let h = CMatrix::from_row_major(
            2,
            2,
            vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 2.0)],
        )
        .unwrap();
        let w = Combiner {
            w: h.clone(),
            kind: CombinerKind::Mmse,
        };
        let (a, b) = build_a_b(&w, &h, 0.1).unwrap();
        assert_eq!(a[(0, 1)], 0.0);
        assert_eq!(a[(1, 0)], 0.0);
        assert_eq!(a[(0, 0)], 1.0);
        assert_eq!(a[(1, 1)], 16.0);
        assert!((b[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn a_b_consistent_with_direct_sinr() {
        for seed in 0..20 {
            let mut rng = RngStream::new(9, seed);
            let h = random_h(&mut rng, 6, 4, 1e-8);
            let p: Vec<f64> = (0..4).map(|_| rng.uniform(0.0, 0.01)).collect();
            // arbitrary (non-MMSE) combiner
            let w = Combiner {
                w: random_h(&mut rng, 6, 4, 1.0),
                kind: CombinerKind::Mmse,
            };
            let (a, b) = build_a_b(&w, &h, 1e-11).unwrap();
            assert!(a.as_slice().iter().all(|&x| x >= 0.0));
            assert!(b.iter().all(|&x| x > 0.0));
            let direct = sinr_report(&w, &h, &p, 1e-11).unwrap();
            let via_ab = sinr_from_a_b(&a, &b, &p);
            for k in 0..4 {
                assert!((direct.gamma[k] - via_ab[k]).abs() <= 1e-12 * direct.gamma[k].max(1e-300));
            }
        }
    }

    #[test]
    fn degenerate_combiner_is_reported() {
        let h = CMatrix::identity(2);
        let mut w = CMatrix::identity(2);
        w[(1, 1)] = c(0.0, 0.0);
        let w = Combiner {
            w,
            kind: CombinerKind::Mmse,
        };
        assert!(matches!(
            build_a_b(&w, &h, 1.0),
            Err(Error::DegenerateCombiner { user: 1 })
        ));
    }

    #[test]
    fn sinr_is_invariant_to_column_scaling() {
        let mut rng = RngStream::new(10, 0);
        let h = random_h(&mut rng, 4, 3, 1.0);
        let p = [0.5, 1.0, 2.0];
        let w = mmse_combiner(&h, &p, 0.1).unwrap();
        let r0 = sinr_report(&w, &h, &p, 0.1).unwrap();
        let mut scaled = w.clone();
        for k in 0..3 {
            let s = rng.cscg(1.0) * 1e3;
            let col: Vec<Complex64> = w.w.col(k).iter().map(|x| x * s).collect();
            scaled.w.set_col(k, &col);
        }
        let r1 = sinr_report(&scaled, &h, &p, 0.1).unwrap();
        for k in 0..3 {
            assert!((r0.gamma[k] - r1.gamma[k]).abs() <= 1e-10 * r0.gamma[k]);
        }
    }

    #[test]
    fn guard_caps_noise_free_sinr() {
        assert_eq!(guarded_ratio(1.0, 0.0), SINR_CAP);
        assert_eq!(guarded_ratio(0.0, 0.0), 0.0);
    }
}
