//! The search distribution around the current pattern: an independent normal
//! per channel, truncated to the valid channel range.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::texture::{CamouflagePattern, CHANNEL_MAX};

/// Diagonal truncated normal `N_[0,255](mean, sigma^2 I)` with a population size.
#[derive(Debug, Clone)]
pub struct SearchDistribution {
    mean: CamouflagePattern,
    sigma: f64,
    lambda: usize,
}

impl SearchDistribution {
    pub fn new(mean: CamouflagePattern, sigma: f64, lambda: usize) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        if lambda < 2 {
            return Err(Error::InsufficientPopulation(lambda));
        }
        Ok(Self { mean, sigma, lambda })
    }

    pub fn mean(&self) -> &CamouflagePattern {
        &self.mean
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    /// Draws candidate `index` of the population seeded by `seed`.
    ///
    /// The result depends only on `(seed, index)`, so candidates can be drawn
    /// in any order or in parallel.
    pub fn sample(&self, seed: u64, index: u64) -> CamouflagePattern {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, index]));
        let channels = self
            .mean
            .channels()
            .iter()
            .map(|&m| {
                let u: f64 = rng.random();
                truncated_normal_quantile(m, self.sigma, 0.0, CHANNEL_MAX, u)
            })
            .collect();
        CamouflagePattern::from_channels(self.mean.width(), self.mean.height(), channels)
            .expect("quantile output lies in the channel range")
    }

    /// The `lambda` candidates for one iteration.
    pub fn sample_population(&self, seed: u64) -> Vec<CamouflagePattern> {
        use rayon::prelude::*;
        (0..self.lambda as u64)
            .into_par_iter()
            .map(|k| self.sample(seed, k))
            .collect()
    }
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Inverse CDF of `N(mean, sigma^2)` restricted to `[lo, hi]`, evaluated at `u in [0, 1]`.
pub fn truncated_normal_quantile(mean: f64, sigma: f64, lo: f64, hi: f64, u: f64) -> f64 {
    let n = standard_normal();
    let a = (lo - mean) / sigma;
    let b = (hi - mean) / sigma;
    let x = if a > 0.0 {
        // Both bounds in the upper tail: work with complements to keep precision.
        let qa = n.cdf(-a);
        let qb = n.cdf(-b);
        if qa <= qb {
            return lo;
        }
        mean - sigma * n.inverse_cdf((qa - u * (qa - qb)).clamp(0.0, 1.0))
    } else {
        let pa = n.cdf(a);
        let pb = n.cdf(b);
        if pb <= pa {
            return if b < 0.0 { hi } else { lo };
        }
        mean + sigma * n.inverse_cdf((pa + u * (pb - pa)).clamp(0.0, 1.0))
    };
    if x.is_nan() {
        return mean.clamp(lo, hi);
    }
    x.clamp(lo, hi)
}

/// Per-channel score-function factor `(candidate - mean) / sigma^2`.
///
/// This is the score of the untruncated normal, applied even though candidates
/// are drawn from the truncated one.
pub fn score_gradient(
    mean: &CamouflagePattern,
    candidate: &CamouflagePattern,
    sigma: f64,
) -> Result<Vec<f64>> {
    if !mean.same_shape(candidate) {
        return Err(Error::DimensionMismatch {
            expected: mean.shape_string(),
            got: candidate.shape_string(),
        });
    }
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let s2 = sigma * sigma;
    Ok(mean
        .channels()
        .iter()
        .zip(candidate.channels())
        .map(|(c, z)| (z - c) / s2)
        .collect())
}

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed lineage (e.g. `[base_seed, iteration, candidate]`) into one seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6A09_E667_F3BC_C908, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}
