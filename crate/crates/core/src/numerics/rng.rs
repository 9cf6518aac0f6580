use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Seeded random stream addressed by `(seed, stream_id)`.
///
/// Backed by ChaCha8, whose 64-bit stream selector gives independent
/// sequences for distinct stream ids under the same seed. Cloning a stream
/// snapshots its position.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

/// Purpose tags used when splitting streams.
pub mod tag {
    pub const SCENARIO: u64 = 0x5343_454e;
    pub const FRI: u64 = 0x4652_4931;
    pub const PSO: u64 = 0x5053_4f31;
    pub const PSO_INIT: u64 = 0x494e_4954;
    pub const PSO_STEP: u64 = 0x5354_4550;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Fresh stream (at position zero) whose id is a hash of this stream's id
    /// and `path`. Independent of how far `self` has advanced.
    pub fn split(&self, path: &[u64]) -> Self {
        let id = path.iter().fold(splitmix64(self.stream_id), |acc, &p| {
            splitmix64(acc ^ splitmix64(p))
        });
        Self::new(self.seed, id)
    }

    /// Uniform draw in `[lo, hi]`; returns `lo` exactly when `lo == hi`.
    /// Consumes one draw either way.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        debug_assert!(lo <= hi);
        // always consume a draw so stream positions do not depend on the bounds
        let u: f64 = self.rng.random();
        if lo == hi {
            return lo;
        }
        (lo + (hi - lo) * u).clamp(lo, hi)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Circularly-symmetric complex Gaussian with `E|x|² = variance`.
    pub fn cscg(&mut self, variance: f64) -> Complex64 {
        debug_assert!(variance >= 0.0);
        let s = (0.5 * variance).sqrt();
        let re = self.standard_normal();
        let im = self.standard_normal();
        if s == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(s * re, s * im)
    }
}
