//! Field-response channel model.
//!
//! Each user reaches the base station over `L` far-field paths. A path is
//! described by its elevation/azimuth angles of arrival and a complex
//! path-response coefficient referred to the region center. Moving an
//! antenna only rotates the phase of each path, so the channel seen at an
//! antenna position `r` is `f(r)ᴴ g` with `f` a unit-modulus phase vector.

use std::collections::hash_map::DefaultHasher;
use std::f64::consts::{FRAC_PI_2, PI};
use std::hash::{Hash, Hasher};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{tag, CMatrix, RngStream};

/// Antenna position `(x, y)` in meters, relative to the region center.
pub type Point = [f64; 2];

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Physical and algorithmic parameters of one experiment.
///
/// Power-like quantities are kept in dB/dBm here; [`Scenario`] carries the
/// linear values used by the solvers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Number of movable antennas.
    #[serde(rename = "M")]
    pub num_antennas: usize,
    /// Number of single-antenna users.
    #[serde(rename = "K")]
    pub num_users: usize,
    /// Paths per user.
    #[serde(rename = "L")]
    pub num_paths: usize,
    /// Carrier wavelength in meters.
    #[serde(rename = "lambda_m")]
    pub wavelength: f64,
    /// Side of the square movement region, in wavelengths.
    #[serde(rename = "A_over_lambda")]
    pub region_over_lambda: f64,
    /// Minimum inter-antenna distance, in wavelengths.
    #[serde(rename = "D_over_lambda")]
    pub min_distance_over_lambda: f64,
    /// Path loss at 1 m, dB.
    pub rho_db: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    pub sigma2_dbm: f64,
    pub pmax_dbm: f64,
    pub dmin_m: f64,
    pub dmax_m: f64,
    /// Bisection accuracy on the linear SINR scale.
    pub epsilon: f64,
    /// Stopping threshold on the min-rate change between alternations.
    pub xi: f64,
    /// Cap on combiner/power alternations.
    pub max_bcd_iterations: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::table1()
    }
}

impl ScenarioConfig {
    /// Reference parameter set: 16 antennas, 12 users, 10 paths.
    pub fn table1() -> Self {
        Self {
            num_antennas: 16,
            num_users: 12,
            num_paths: 10,
            wavelength: 0.1,
            region_over_lambda: 3.0,
            min_distance_over_lambda: 0.5,
            rho_db: -40.0,
            alpha: 2.8,
            sigma2_dbm: -80.0,
            pmax_dbm: 10.0,
            dmin_m: 20.0,
            dmax_m: 100.0,
            epsilon: 1e-3,
            xi: 1e-3,
            max_bcd_iterations: 200,
        }
    }

    /// Reduced instance size that runs a full comparison in minutes.
    pub fn desk() -> Self {
        Self {
            num_antennas: 6,
            num_users: 4,
            num_paths: 6,
            ..Self::table1()
        }
    }

    pub fn region_side(&self) -> f64 {
        self.region_over_lambda * self.wavelength
    }

    pub fn min_distance(&self) -> f64 {
        self.min_distance_over_lambda * self.wavelength
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::config(m));
        if self.num_antennas == 0 || self.num_users == 0 {
            return fail("M and K must be positive");
        }
        if self.num_users > self.num_antennas {
            return fail("K must not exceed M");
        }
        if self.num_paths == 0 {
            return fail("L must be at least 1");
        }
        if !(self.wavelength > 0.0) {
            return fail("lambda_m must be positive");
        }
        if !(self.region_over_lambda > 0.0) {
            return fail("A_over_lambda must be positive");
        }
        if !(self.min_distance_over_lambda > 0.0) {
            return fail("D_over_lambda must be positive");
        }
        if !(self.dmin_m > 0.0 && self.dmin_m <= self.dmax_m) {
            return fail("need 0 < dmin_m <= dmax_m");
        }
        if !(self.epsilon > 0.0 && self.xi > 0.0) {
            return fail("epsilon and xi must be positive");
        }
        if self.max_bcd_iterations == 0 {
            return fail("max_bcd_iterations must be positive");
        }
        let finite = [self.rho_db, self.alpha, self.sigma2_dbm, self.pmax_dbm];
        if finite.iter().any(|v| !v.is_finite()) {
            return fail("rho_db, alpha, sigma2_dbm and pmax_dbm must be finite");
        }
        Ok(())
    }
}

/// Angular-domain channel description of one user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserChannelParams {
    pub distance: f64,
    /// Elevation angles of arrival, rad.
    pub thetas: Vec<f64>,
    /// Azimuth angles of arrival, rad.
    pub phis: Vec<f64>,
    /// Path-response coefficients.
    pub prv: Vec<Complex64>,
}

impl UserChannelParams {
    pub fn num_paths(&self) -> usize {
        self.prv.len()
    }
}

/// Order-sensitive fingerprint of a user list, built from raw bit patterns.
pub fn fingerprint(users: &[UserChannelParams]) -> u64 {
    let mut h = DefaultHasher::new();
    for u in users {
        u.distance.to_bits().hash(&mut h);
        for ((t, p), g) in u.thetas.iter().zip(&u.phis).zip(&u.prv) {
            t.to_bits().hash(&mut h);
            p.to_bits().hash(&mut h);
            g.re.to_bits().hash(&mut h);
            g.im.to_bits().hash(&mut h);
        }
    }
    h.finish()
}

/// Antenna position vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Apv {
    pub positions: Vec<Point>,
}

impl Apv {
    pub fn new(positions: Vec<Point>) -> Self {
        Self { positions }
    }

    /// From `[x1, y1, x2, y2, ...]`.
    pub fn from_flat(flat: &[f64]) -> Self {
        debug_assert!(flat.len().is_multiple_of(2));
        Self {
            positions: flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.positions.iter().flat_map(|p| [p[0], p[1]]).collect()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn within_box(&self, side: f64) -> bool {
        let h = side / 2.0;
        self.positions
            .iter()
            .all(|p| p.iter().all(|&c| (-h..=h).contains(&c)))
    }

    /// Same layout shifted by `offset`.
    pub fn translated(&self, offset: Point) -> Self {
        Self::new(
            self.positions
                .iter()
                .map(|p| [p[0] + offset[0], p[1] + offset[1]])
                .collect(),
        )
    }
}

/// Error model for the field-response information used by the optimizer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FriErrorModel {
    /// Maximum angle-of-arrival error, rad.
    pub mu: f64,
    /// Variance of the normalized path-response error.
    pub delta: f64,
}

impl FriErrorModel {
    pub fn is_exact(&self) -> bool {
        self.mu == 0.0 && self.delta == 0.0
    }
}

/// One channel realization together with the linear-scale powers.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub users: Vec<UserChannelParams>,
    /// Noise power, W.
    pub sigma2: f64,
    /// Per-user power budget, W.
    pub pmax: f64,
}

impl Scenario {
    pub fn new(config: ScenarioConfig, users: Vec<UserChannelParams>) -> Self {
        let sigma2 = dbm_to_watts(config.sigma2_dbm);
        let pmax = dbm_to_watts(config.pmax_dbm);
        Self {
            config,
            users,
            sigma2,
            pmax,
        }
    }

    pub fn generate(config: &ScenarioConfig, rng: &RngStream) -> Result<Self> {
        config.validate()?;
        Ok(Self::new(config.clone(), generate_users(config, rng)))
    }

    /// Same configuration with a different user description (e.g. estimated FRI).
    pub fn with_users(&self, users: Vec<UserChannelParams>) -> Self {
        Self {
            users,
            ..self.clone()
        }
    }

    pub fn channel_matrix(&self, apv: &Apv) -> CMatrix {
        channel_matrix(apv, &self.users, self.config.wavelength)
    }

    pub fn fingerprint(&self) -> u64 {
        fingerprint(&self.users)
    }
}

/// Draws `K` users: distances uniform in `[dmin, dmax]`, angles uniform in
/// `[-π/2, π/2]`, path coefficients `CN(0, ρ d^-α / L)`.
///
/// User `k` draws from its own sub-stream, so the first users of a larger
/// population coincide with a smaller one drawn from the same stream.
pub fn generate_users(cfg: &ScenarioConfig, rng: &RngStream) -> Vec<UserChannelParams> {
    let rho = db_to_linear(cfg.rho_db);
    let l = cfg.num_paths;
    (0..cfg.num_users)
        .map(|k| {
            let mut s = rng.split(&[tag::SCENARIO, k as u64]);
            let distance = s.uniform(cfg.dmin_m, cfg.dmax_m);
            let variance = rho * distance.powf(-cfg.alpha) / l as f64;
            let mut thetas = Vec::with_capacity(l);
            let mut phis = Vec::with_capacity(l);
            let mut prv = Vec::with_capacity(l);
            for _ in 0..l {
                thetas.push(s.uniform(-FRAC_PI_2, FRAC_PI_2));
                phis.push(s.uniform(-FRAC_PI_2, FRAC_PI_2));
                prv.push(s.cscg(variance));
            }
            UserChannelParams {
                distance,
                thetas,
                phis,
                prv,
            }
        })
        .collect()
}

/// Propagation distance difference of a path between `pos` and the region center.
#[inline]
pub fn phase_difference(pos: Point, theta: f64, phi: f64) -> f64 {
    pos[0] * theta.sin() * phi.cos() + pos[1] * theta.cos()
}

/// Unit-modulus per-path phase factors at `pos`.
pub fn field_response_vector(
    pos: Point,
    user: &UserChannelParams,
    wavelength: f64,
) -> Vec<Complex64> {
    let k = 2.0 * PI / wavelength;
    user.thetas
        .iter()
        .zip(&user.phis)
        .map(|(&t, &p)| Complex64::from_polar(1.0, k * phase_difference(pos, t, p)))
        .collect()
}

/// `h[m] = f(r_m)ᴴ g` for every antenna.
pub fn channel_vector(apv: &Apv, user: &UserChannelParams, wavelength: f64) -> Vec<Complex64> {
    let k = 2.0 * PI / wavelength;
    // direction cosines, reused across antennas
    let dirs: Vec<(f64, f64)> = user
        .thetas
        .iter()
        .zip(&user.phis)
        .map(|(&t, &p)| (t.sin() * p.cos(), t.cos()))
        .collect();
    apv.positions
        .iter()
        .map(|pos| {
            dirs.iter()
                .zip(&user.prv)
                .map(|(&(cx, cy), &g)| {
                    let phase = k * (pos[0] * cx + pos[1] * cy);
                    Complex64::from_polar(1.0, -phase) * g
                })
                .sum()
        })
        .collect()
}

/// `M × K` channel matrix; column `k` is user `k`'s channel vector.
pub fn channel_matrix(apv: &Apv, users: &[UserChannelParams], wavelength: f64) -> CMatrix {
    let mut h = CMatrix::zeros(apv.len(), users.len());
    for (k, user) in users.iter().enumerate() {
        h.set_col(k, &channel_vector(apv, user, wavelength));
    }
    h
}

/// Estimated FRI: `θ̂ = θ − u`, `φ̂ = φ − u'` with `u, u' ~ U[−μ/2, μ/2]`,
/// and `ĝ = g − |g| e` with `e ~ CN(0, δ)`.
///
/// The draw sequence does not depend on `μ` or `δ`, so sweeps over either
/// see the same underlying randomness scaled by the error size.
pub fn perturb_fri(
    users: &[UserChannelParams],
    err: &FriErrorModel,
    rng: &RngStream,
) -> Vec<UserChannelParams> {
    let half = err.mu / 2.0;
    users
        .iter()
        .enumerate()
        .map(|(k, u)| {
            let mut s = rng.split(&[tag::FRI, k as u64]);
            let mut est = u.clone();
            for l in 0..u.num_paths() {
                let dt = s.uniform(-half, half);
                let dp = s.uniform(-half, half);
                let e = s.cscg(err.delta);
                est.thetas[l] = u.thetas[l] - dt;
                est.phis[l] = u.phis[l] - dp;
                est.prv[l] = u.prv[l] - e * u.prv[l].norm();
            }
            est
        })
        .collect()
}

/// Single-antenna channel power gain `|f(r)ᴴ g|²` (dB) over an `n × n` grid
/// spanning the region. Rows run along `y`, columns along `x`.
pub fn gain_map(
    user: &UserChannelParams,
    wavelength: f64,
    side: f64,
    n: usize,
) -> Vec<(f64, f64, f64)> {
    let h = side / 2.0;
    let step = if n > 1 { side / (n - 1) as f64 } else { 0.0 };
    let mut out = Vec::with_capacity(n * n);
    for iy in 0..n {
        for ix in 0..n {
            let pos = [-h + ix as f64 * step, -h + iy as f64 * step];
            let g = channel_vector(&Apv::new(vec![pos]), user, wavelength)[0];
            out.push((pos[0], pos[1], 10.0 * g.norm_sqr().log10()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::norm_sqr;

    fn unit_user(l: usize, rng: &mut RngStream) -> UserChannelParams {
        UserChannelParams {
            distance: 50.0,
            thetas: (0..l).map(|_| rng.uniform(-FRAC_PI_2, FRAC_PI_2)).collect(),
            phis: (0..l).map(|_| rng.uniform(-FRAC_PI_2, FRAC_PI_2)).collect(),
            prv: (0..l).map(|_| rng.cscg(1.0)).collect(),
        }
    }

    fn random_apv(m: usize, side: f64, rng: &mut RngStream) -> Apv {
        Apv::new(
            (0..m)
                .map(|_| {
                    [
                        rng.uniform(-side / 2.0, side / 2.0),
                        rng.uniform(-side / 2.0, side / 2.0),
                    ]
                })
                .collect(),
        )
    }

    #[test]
    fn table1_defaults() {
        let c = ScenarioConfig::table1();
        assert_eq!((c.num_antennas, c.num_users, c.num_paths), (16, 12, 10));
        assert_eq!(c.region_side(), 3.0 * 0.1);
        assert_eq!(c.min_distance(), 0.05);
        assert_eq!(
            (c.rho_db, c.alpha, c.sigma2_dbm, c.pmax_dbm),
            (-40.0, 2.8, -80.0, 10.0)
        );
        assert_eq!((c.dmin_m, c.dmax_m), (20.0, 100.0));
        assert!(c.validate().is_ok());
        let bad = ScenarioConfig {
            num_users: 17,
            ..ScenarioConfig::table1()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn unit_conversions() {
        assert!((dbm_to_watts(10.0) - 0.01).abs() < 1e-15);
        assert!((dbm_to_watts(-80.0) - 1e-11).abs() < 1e-25);
        assert!((db_to_linear(-40.0) - 1e-4).abs() < 1e-18);
        assert!((watts_to_dbm(0.01) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn single_path_unit_gain_moment() {
        let cfg = ScenarioConfig {
            num_antennas: 1,
            num_users: 1,
            num_paths: 1,
            rho_db: 0.0,
            alpha: 0.0,
            ..ScenarioConfig::table1()
        };
        let n = 20_000;
        let m: f64 = (0..n)
            .map(|i| generate_users(&cfg, &RngStream::new(1, i))[0].prv[0].norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((m - 1.0).abs() < 0.03, "mean {m}");
    }

    #[test]
    fn expected_gain_normalization_table1() {
        let cfg = ScenarioConfig {
            num_antennas: 100,
            num_users: 100,
            ..ScenarioConfig::table1()
        };
        let rho = db_to_linear(cfg.rho_db);
        let mut acc = 0.0;
        let mut count = 0;
        for t in 0..100 {
            for u in generate_users(&cfg, &RngStream::new(2, t)) {
                assert!((20.0..=100.0).contains(&u.distance));
                assert!(u.thetas.iter().chain(&u.phis).all(|a| a.abs() <= FRAC_PI_2));
                acc += norm_sqr(&u.prv) / (rho * u.distance.powf(-cfg.alpha));
                count += 1;
            }
        }
        assert_eq!(count, 10_000);
        let mean = acc / count as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn generation_is_deterministic_and_nested() {
        let cfg = ScenarioConfig::desk();
        let rng = RngStream::new(3, 1);
        assert_eq!(generate_users(&cfg, &rng), generate_users(&cfg, &rng));
        let small = ScenarioConfig {
            num_users: 2,
            ..cfg.clone()
        };
        assert_eq!(
            generate_users(&small, &rng)[..],
            generate_users(&cfg, &rng)[..2]
        );
    }

    #[test]
    fn phase_difference_cases() {
        assert_eq!(phase_difference([0.0, 0.0], 0.7, -0.2), 0.0);
        assert!((phase_difference([0.025, 0.0], FRAC_PI_2, 0.0) - 0.025).abs() < 1e-17);
        let expected = 0.01 * 0.3f64.sin() * (-1.1f64).cos() + 0.02 * 0.3f64.cos();
        assert_eq!(phase_difference([0.01, 0.02], 0.3, -1.1), expected);
    }

    #[test]
    fn field_response_cases() {
        let mut rng = RngStream::new(4, 0);
        let u = unit_user(5, &mut rng);
        assert!(field_response_vector([0.0, 0.0], &u, 0.1)
            .iter()
            .all(|f| *f == Complex64::new(1.0, 0.0)));
        for _ in 0..50 {
            let pos = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
            assert!(field_response_vector(pos, &u, 0.1)
                .iter()
                .all(|f| (f.norm() - 1.0).abs() <= 1e-12));
        }
        let one = UserChannelParams {
            distance: 1.0,
            thetas: vec![FRAC_PI_2],
            phis: vec![0.0],
            prv: vec![Complex64::new(1.0, 0.0)],
        };
        let f = field_response_vector([0.1 / 4.0, 0.0], &one, 0.1)[0];
        assert!((f - Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn channel_vector_cases() {
        let mut rng = RngStream::new(5, 0);
        let apv = random_apv(6, 0.3, &mut rng);
        let u1 = unit_user(1, &mut rng);
        for h in channel_vector(&apv, &u1, 0.1) {
            assert!((h.norm() - u1.prv[0].norm()).abs() < 1e-12);
        }
        let mut zero = unit_user(3, &mut rng);
        zero.prv = vec![Complex64::new(0.0, 0.0); 3];
        assert!(channel_vector(&apv, &zero, 0.1)
            .iter()
            .all(|h| h.norm() == 0.0));

        // two-term summation oracle
        let u2 = unit_user(2, &mut rng);
        let h = channel_vector(&apv, &u2, 0.1);
        for (m, pos) in apv.positions.iter().enumerate() {
            let mut oracle = Complex64::new(0.0, 0.0);
            for l in 0..2 {
                let rho =
                    pos[0] * u2.thetas[l].sin() * u2.phis[l].cos() + pos[1] * u2.thetas[l].cos();
                let arg = 2.0 * PI / 0.1 * rho;
                oracle += Complex64::new(arg.cos(), -arg.sin()) * u2.prv[l];
            }
            assert!((h[m] - oracle).norm() <= 1e-12 * oracle.norm().max(1.0));
        }
    }

    #[test]
    fn channel_matrix_columns_and_permutation() {
        let cfg = ScenarioConfig::desk();
        let mut rng = RngStream::new(6, 0);
        let users = generate_users(&cfg, &rng);
        let apv = random_apv(cfg.num_antennas, cfg.region_side(), &mut rng);
        let h = channel_matrix(&apv, &users[..1], 0.1);
        assert_eq!(h.cols(), 1);
        assert_eq!(h.col(0), channel_vector(&apv, &users[0], 0.1));

        let full = channel_matrix(&apv, &users, 0.1);
        let mut perm = users.clone();
        perm.reverse();
        let permuted = channel_matrix(&apv, &perm, 0.1);
        for k in 0..users.len() {
            assert_eq!(full.col(k), permuted.col(users.len() - 1 - k));
        }
    }

    #[test]
    fn table1_channel_is_finite_and_reproducible() {
        let cfg = ScenarioConfig::table1();
        let rng = RngStream::new(7, 7);
        let mut r = rng.split(&[99]);
        let apv = random_apv(16, cfg.region_side(), &mut r);
        let a = Scenario::generate(&cfg, &rng).unwrap().channel_matrix(&apv);
        let b = Scenario::generate(&cfg, &rng).unwrap().channel_matrix(&apv);
        assert!(a.is_finite());
        assert_eq!((a.rows(), a.cols()), (16, 12));
        assert_eq!(a, b);
    }

    #[test]
    fn single_path_norm_is_position_invariant() {
        let mut rng = RngStream::new(8, 0);
        let u = unit_user(1, &mut rng);
        for _ in 0..20 {
            let apv = random_apv(5, 0.3, &mut rng);
            let n = norm_sqr(&channel_vector(&apv, &u, 0.1));
            let expected = 5.0 * u.prv[0].norm_sqr();
            assert!((n - expected).abs() <= 1e-10 * expected);
        }
    }

    #[test]
    fn translation_rotates_path_coefficients() {
        let mut rng = RngStream::new(9, 0);
        let u = unit_user(6, &mut rng);
        let apv = random_apv(5, 0.3, &mut rng);
        let offset = [0.013, -0.021];
        let shifted = channel_vector(&apv.translated(offset), &u, 0.1);

        // a common shift equals a unit-modulus rotation of each path coefficient
        let mut rotated = u.clone();
        for (l, g) in rotated.prv.iter_mut().enumerate() {
            let f = field_response_vector(offset, &u, 0.1)[l];
            *g *= f.conj();
            assert!((g.norm() - u.prv[l].norm()).abs() < 1e-15);
        }
        let expected = channel_vector(&apv, &rotated, 0.1);
        for (a, b) in shifted.iter().zip(&expected) {
            assert!((a - b).norm() <= 1e-12 * b.norm().max(1e-300));
        }

        // with a single path the norm itself is unchanged
        let one = unit_user(1, &mut rng);
        let n0 = norm_sqr(&channel_vector(&apv, &one, 0.1));
        let n1 = norm_sqr(&channel_vector(&apv.translated(offset), &one, 0.1));
        assert!((n0 - n1).abs() <= 1e-10 * n0);
    }

    #[test]
    fn perturbation_zero_error_is_identity() {
        let cfg = ScenarioConfig::desk();
        let users = generate_users(&cfg, &RngStream::new(10, 0));
        let est = perturb_fri(&users, &FriErrorModel::default(), &RngStream::new(10, 1));
        assert_eq!(est, users);
    }

    #[test]
    fn aoa_error_support_bound() {
        let cfg = ScenarioConfig::table1();
        let err = FriErrorModel {
            mu: 0.2,
            delta: 0.0,
        };
        for t in 0..50 {
            let users = generate_users(&cfg, &RngStream::new(11, t));
            let est = perturb_fri(&users, &err, &RngStream::new(12, t));
            for (u, e) in users.iter().zip(&est) {
                for l in 0..u.num_paths() {
                    assert!((u.thetas[l] - e.thetas[l]).abs() <= 0.1 + 1e-15);
                    assert!((u.phis[l] - e.phis[l]).abs() <= 0.1 + 1e-15);
                }
                assert_eq!(u.prv, e.prv);
            }
        }
    }

    #[test]
    fn prv_error_second_moment() {
        let cfg = ScenarioConfig {
            num_antennas: 100,
            num_users: 100,
            ..ScenarioConfig::table1()
        };
        let err = FriErrorModel {
            mu: 0.0,
            delta: 0.1,
        };
        let mut acc = 0.0;
        let mut n = 0;
        for t in 0..100 {
            let users = generate_users(&cfg, &RngStream::new(13, t));
            let est = perturb_fri(&users, &err, &RngStream::new(14, t));
            for (u, e) in users.iter().zip(&est) {
                for l in 0..u.num_paths() {
                    acc += (u.prv[l] - e.prv[l]).norm_sqr() / u.prv[l].norm_sqr();
                    n += 1;
                }
            }
        }
        assert_eq!(n, 100_000);
        let m = acc / n as f64;
        assert!((m - 0.1).abs() < 0.005, "E = {m}");
    }

    #[test]
    fn gain_map_covers_region() {
        let mut rng = RngStream::new(15, 0);
        let u = unit_user(1, &mut rng);
        let map = gain_map(&u, 0.1, 0.3, 7);
        assert_eq!(map.len(), 49);
        assert_eq!((map[0].0, map[0].1), (-0.15, -0.15));
        let g = 10.0 * u.prv[0].norm_sqr().log10();
        assert!(map.iter().all(|p| (p.2 - g).abs() < 1e-9));
    }
}
