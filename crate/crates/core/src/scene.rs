//! Seeded synthetic scenes: isotropic Gaussian blobs, each carrying its own
//! smooth spectral curve.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cube::{Dims, HsiCube};
use crate::error::{Error, Result};

const COSINE_TERMS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub dims: Dims,
    pub blobs: usize,
    pub seed: u64,
    /// Highest spectral frequency, in cycles across the band range.
    pub spectral_smoothness: f64,
}

impl SceneSpec {
    pub fn new(dims: Dims, blobs: usize, seed: u64) -> Self {
        SceneSpec {
            dims,
            blobs,
            seed,
            spectral_smoothness: 1.0,
        }
    }
}

struct Blob {
    row: f64,
    col: f64,
    radius: f64,
    amplitude: f64,
    envelope: Vec<f64>,
}

fn spectral_envelope(rng: &mut ChaCha8Rng, bands: usize, bandwidth: f64) -> Vec<f64> {
    let terms: Vec<(f64, f64, f64)> = (0..COSINE_TERMS)
        .map(|_| {
            let coef = rng.random_range(-1.0..=1.0) * 0.5 / COSINE_TERMS as f64;
            let freq = rng.random::<f64>() * bandwidth;
            let phase = rng.random::<f64>() * 2.0 * PI;
            (coef, freq, phase)
        })
        .collect();
    (0..bands)
        .map(|l| {
            let t = if bands > 1 {
                l as f64 / (bands - 1) as f64
            } else {
                0.0
            };
            let v: f64 = terms
                .iter()
                .map(|&(a, f, p)| a * (2.0 * PI * f * t + p).cos())
                .sum();
            0.5 + v
        })
        .collect()
}

/// Render the scene described by `spec`. Pure function of `spec`.
pub fn generate_scene(spec: &SceneSpec) -> Result<HsiCube> {
    if !(spec.spectral_smoothness.is_finite() && spec.spectral_smoothness >= 0.0) {
        return Err(Error::param(format!(
            "spectral smoothness must be finite and nonnegative, got {}",
            spec.spectral_smoothness
        )));
    }
    let d = spec.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let extent = d.height.min(d.width) as f64;
    let blobs: Vec<Blob> = (0..spec.blobs)
        .map(|_| Blob {
            row: rng.random::<f64>() * d.height as f64,
            col: rng.random::<f64>() * d.width as f64,
            radius: (0.04 + 0.12 * rng.random::<f64>()) * extent.max(1.0),
            amplitude: rng.random_range(0.2..=0.7),
            envelope: spectral_envelope(&mut rng, d.bands, spec.spectral_smoothness),
        })
        .collect();

    let mut data = vec![0.0f32; d.len()];
    let mut spatial = vec![0.0f64; d.plane()];
    for blob in &blobs {
        let inv = 1.0 / (2.0 * blob.radius * blob.radius);
        for r in 0..d.height {
            for c in 0..d.width {
                let dr = r as f64 + 0.5 - blob.row;
                let dc = c as f64 + 0.5 - blob.col;
                spatial[r * d.width + c] = blob.amplitude * (-(dr * dr + dc * dc) * inv).exp();
            }
        }
        for (l, &e) in blob.envelope.iter().enumerate() {
            let band = &mut data[l * d.plane()..(l + 1) * d.plane()];
            for (v, &s) in band.iter_mut().zip(&spatial) {
                *v += (s * e) as f32;
            }
        }
    }
    HsiCube::ingest(d, data, crate::cube::DEFAULT_PEAK)
}
