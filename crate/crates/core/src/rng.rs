//! Seeded random streams and the sampling laws used by the simulators.
//!
//! Every trajectory seed drives a ChaCha8 generator (`seed_from_u64`), and
//! independent signal sources draw from distinct ChaCha stream ids of that
//! generator: input on stream 0, process noise on stream 1, dither on
//! stream 2. Gaussian variates come from `rand_distr::StandardNormal`
//! (ziggurat). Results are bit-reproducible within this implementation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SysIdError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Input = 0,
    Noise = 1,
    Dither = 2,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `count` distinct seeds split from one master seed: seed `i` is
/// `mix64(master ^ mix64(i))`.
pub fn split_seeds(master: u64, count: usize) -> Vec<u64> {
    (0..count as u64)
        .map(|i| mix64(master ^ mix64(i)))
        .collect()
}

/// Scalar sampling law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Law {
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, variance: f64 },
}

impl Law {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Law::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo <= hi) => Err(
                SysIdError::InvalidArgument(format!("uniform law needs lo <= hi, got [{lo}, {hi}]")),
            ),
            Law::Gaussian { mean, variance }
                if !(mean.is_finite() && variance.is_finite() && variance >= 0.0) =>
            {
                Err(SysIdError::InvalidArgument(format!(
                    "gaussian law needs finite mean and nonnegative variance, got ({mean}, {variance})"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Law::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Law::Gaussian { mean, variance } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + variance.sqrt() * z
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Law::Uniform { lo, hi } => 0.5 * (lo + hi),
            Law::Gaussian { mean, .. } => mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Law::Uniform { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
            Law::Gaussian { variance, .. } => variance,
        }
    }

    /// Largest possible `|x|`, infinite for unbounded laws.
    pub fn bound(&self) -> f64 {
        match *self {
            Law::Uniform { lo, hi } => lo.abs().max(hi.abs()),
            Law::Gaussian { mean, variance } if variance == 0.0 => mean.abs(),
            Law::Gaussian { .. } => f64::INFINITY,
        }
    }
}
