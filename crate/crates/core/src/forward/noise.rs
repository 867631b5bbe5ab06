//! Multiplicative Gaussian measurement noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::MeasurementSet;
use crate::error::{DotError, Result};

/// How a noise level `p` maps to the relative standard deviation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseReading {
    /// `p` is the relative standard deviation.
    #[default]
    Std,
    /// `p` is the relative variance; the standard deviation is `√p`.
    Variance,
}

impl NoiseReading {
    pub fn relative_std(self, p: f64) -> f64 {
        match self {
            NoiseReading::Std => p,
            NoiseReading::Variance => p.sqrt(),
        }
    }
}

impl std::str::FromStr for NoiseReading {
    type Err = DotError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "std" => Ok(NoiseReading::Std),
            "variance" => Ok(NoiseReading::Variance),
            other => Err(DotError::InvalidArgument(format!(
                "unknown noise reading `{other}`"
            ))),
        }
    }
}

/// Perturb every fluence value `v` to `v·(1 + σ ξ)`, ξ ~ N(0, 1).
///
/// Draws that would make a value non-positive are redrawn. The background
/// readings are left untouched; `p = 0` returns the input unchanged.
pub fn add_noise(
    m: &MeasurementSet,
    p: f64,
    seed: u64,
    reading: NoiseReading,
) -> Result<MeasurementSet> {
    if !(p >= 0.0) {
        return Err(DotError::InvalidArgument(format!(
            "noise level {p} must be non-negative"
        )));
    }
    let mut out = m.clone();
    out.noise_level = p;
    out.seed = seed;
    if p == 0.0 {
        return Ok(out);
    }
    let sigma = reading.relative_std(p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in out.fluence.iter_mut() {
        loop {
            let xi: f64 = StandardNormal.sample(&mut rng);
            let factor = 1.0 + sigma * xi;
            if factor > 0.0 {
                *v *= factor;
                break;
            }
        }
    }
    Ok(out)
}
