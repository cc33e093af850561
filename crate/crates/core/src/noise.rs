//! Sensor noise injection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::cube::Measurement;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    /// Additive i.i.d. `N(0, sigma^2)`.
    Gaussian { sigma: f64 },
    /// Photon counting at the given bit depth, full scale at the image max.
    Shot { bits: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseModel {
    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        NoiseModel {
            kind: NoiseKind::Gaussian { sigma },
            seed,
        }
    }

    pub fn shot(bits: u32, seed: u64) -> Self {
        NoiseModel {
            kind: NoiseKind::Shot { bits },
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            NoiseKind::Gaussian { sigma } if !(sigma.is_finite() && sigma >= 0.0) => Err(
                Error::param(format!("noise sigma must be finite and >= 0, got {sigma}")),
            ),
            NoiseKind::Shot { bits } if !(1..=16).contains(&bits) => Err(Error::param(format!(
                "shot noise bit depth must be in [1, 16], got {bits}"
            ))),
            _ => Ok(()),
        }
    }
}

/// Return a noisy copy of `meas`. Negative results are clamped to zero.
pub fn add_noise(meas: &Measurement, model: &NoiseModel) -> Result<Measurement> {
    model.validate()?;
    let mut out = meas.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    match model.kind {
        NoiseKind::Gaussian { sigma } => {
            if sigma == 0.0 {
                return Ok(out);
            }
            let normal = Normal::new(0.0, sigma).map_err(|e| Error::param(e.to_string()))?;
            for v in out.data_mut() {
                *v = ((*v as f64 + normal.sample(&mut rng)) as f32).max(0.0);
            }
        }
        NoiseKind::Shot { bits } => {
            let max = meas.max_value() as f64;
            if max <= 0.0 {
                return Ok(out);
            }
            let full_scale = ((1u64 << bits) - 1) as f64;
            let scale = full_scale / max;
            for v in out.data_mut() {
                let lambda = (*v as f64 * scale).max(0.0);
                let count = if lambda > 0.0 {
                    Poisson::new(lambda)
                        .map_err(|e| Error::param(e.to_string()))?
                        .sample(&mut rng)
                } else {
                    0.0
                };
                *v = (count / scale) as f32;
            }
        }
    }
    Ok(out)
}
