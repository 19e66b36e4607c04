//! Seeded random streams and the scalar samplers built on them.
//!
//! Every stream is a xoshiro256++ generator seeded through SplitMix64
//! (`Xoshiro256PlusPlus::seed_from_u64`). Uniform variates take the top 53
//! bits of one 64-bit output. The samplers below consume uniforms in a fixed
//! order so that another implementation of the same generator reproduces the
//! same draws:
//!
//! - normal: Box–Muller, two uniforms per draw, cosine branch only;
//! - exponential: inverse CDF on one uniform in (0, 1];
//! - gamma: Marsaglia–Tsang squeeze (one normal plus one uniform per
//!   attempt), with the `U^(1/k)` boost for shape below one.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

const TWO_POW_53: f64 = 9_007_199_254_740_992.0;

#[derive(Debug, Clone)]
pub struct Stream(Xoshiro256PlusPlus);

impl Stream {
    pub fn from_seed(seed: u64) -> Self {
        Stream(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    /// Stream used by trial `trial_index` of an experiment seeded with `base_seed`.
    pub fn for_trial(base_seed: u64, trial_index: u64) -> Self {
        Self::from_seed(base_seed.wrapping_add(trial_index))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / TWO_POW_53
    }

    /// Uniform in (0, 1].
    pub fn uniform_open_closed(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 / TWO_POW_53
    }

    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.uniform_open_closed();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn normal(&mut self, mean: f64, std_dev: f64) -> f64 {
        mean + std_dev * self.standard_normal()
    }

    pub fn exponential(&mut self, mean: f64) -> f64 {
        -mean * self.uniform_open_closed().ln()
    }

    /// Gamma variate with the given shape and scale (mean `shape * scale`).
    pub fn gamma(&mut self, shape: f64, scale: f64) -> f64 {
        debug_assert!(shape > 0.0 && scale > 0.0);
        if shape < 1.0 {
            let boosted = self.gamma(shape + 1.0, 1.0);
            let u = self.uniform_open_closed();
            return scale * boosted * u.powf(1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let z = self.standard_normal();
            let v = 1.0 + c * z;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u = self.uniform_open_closed();
            let z2 = z * z;
            if u < 1.0 - 0.0331 * z2 * z2 || u.ln() < 0.5 * z2 + d * (1.0 - v + v.ln()) {
                return scale * d * v;
            }
        }
    }
}
