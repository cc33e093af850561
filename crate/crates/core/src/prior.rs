//! Scale priors and the closed-form weight update.
//!
//! Each pixel carries a Gaussian with mean `u_i` and standard deviation
//! `theta_i`; the quadratic weight is `w_i = sigma^2 / theta_i^2`. For a
//! fixed residual `e = x - u`, the weight is the minimiser over `theta` of
//!
//! ```text
//! sigma^2 e^2 / theta^2 + 2 sigma^2 log(theta) + 2 sigma^2 J(theta)
//! ```
//!
//! With the Jeffreys energy `J(theta) = log(theta)` the stationary point is
//! `theta^2 = e^2 / 2`, i.e. `w = 2 sigma^2 / e^2`. `eps` is added to `e^2`
//! so the weight stays bounded where the residual vanishes.

use crate::cube::{Dims, HsiCube};
use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-2;
pub const DEFAULT_SIGMA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalePrior {
    Jeffreys {
        eps: f64,
    },
    /// `w = sigma^2 / (local variance of the residual + eps)` over a square
    /// spatial window within each band.
    LocalVariance {
        window: usize,
        eps: f64,
    },
    Constant {
        w0: f64,
    },
}

impl Default for ScalePrior {
    fn default() -> Self {
        ScalePrior::Jeffreys { eps: DEFAULT_EPS }
    }
}

impl ScalePrior {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ScalePrior::Jeffreys { eps } | ScalePrior::LocalVariance { eps, .. }
                if !(eps.is_finite() && eps > 0.0) =>
            {
                Err(Error::param(format!("eps must be positive, got {eps}")))
            }
            ScalePrior::LocalVariance { window, .. } if window == 0 || window % 2 == 0 => {
                Err(Error::param(format!(
                    "variance window must be odd and >= 1, got {window}"
                )))
            }
            ScalePrior::Constant { w0 } if !(w0.is_finite() && w0 >= 0.0) => Err(Error::param(
                format!("w0 must be finite and >= 0, got {w0}"),
            )),
            _ => Ok(()),
        }
    }

    /// Largest weight this prior can emit for noise level `sigma`.
    pub fn weight_cap(&self, sigma: f64) -> f64 {
        match *self {
            ScalePrior::Jeffreys { eps } => 2.0 * sigma * sigma / eps,
            ScalePrior::LocalVariance { eps, .. } => sigma * sigma / eps,
            ScalePrior::Constant { w0 } => w0,
        }
    }

    /// Short name used in CLI flags and config files.
    pub fn name(&self) -> &'static str {
        match self {
            ScalePrior::Jeffreys { .. } => "jeffreys",
            ScalePrior::LocalVariance { .. } => "localvar",
            ScalePrior::Constant { .. } => "constant",
        }
    }
}

/// Per-pixel regularisation weights, local means and noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct GsmState {
    pub weights: Vec<f32>,
    pub means: Vec<f32>,
    pub sigma: f64,
}

/// Closed-form Jeffreys weight for one residual.
#[inline]
pub fn jeffreys_weight(residual: f64, sigma: f64, eps: f64) -> f64 {
    2.0 * sigma * sigma / (residual * residual + eps)
}

/// Solve the weight subproblem for fixed `x` and means `u`.
pub fn update_weights(
    x: &HsiCube,
    means: &[f32],
    sigma: f64,
    prior: &ScalePrior,
) -> Result<Vec<f32>> {
    prior.validate()?;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::param(format!("sigma must be positive, got {sigma}")));
    }
    if means.len() != x.data().len() {
        return Err(Error::shape(format!(
            "means have {} values, cube has {}",
            means.len(),
            x.data().len()
        )));
    }
    let residual = x
        .data()
        .iter()
        .zip(means)
        .map(|(&a, &b)| a as f64 - b as f64);
    let weights = match *prior {
        ScalePrior::Jeffreys { eps } => residual
            .map(|e| jeffreys_weight(e, sigma, eps) as f32)
            .collect(),
        ScalePrior::Constant { w0 } => vec![w0 as f32; means.len()],
        ScalePrior::LocalVariance { window, eps } => {
            let e: Vec<f64> = residual.collect();
            let var = windowed_variance(&e, x.dims(), window);
            var.into_iter()
                .map(|v| (sigma * sigma / (v + eps)) as f32)
                .collect()
        }
    };
    Ok(weights)
}

/// Per-band spatial variance over a `window x window` box, replicate borders.
fn windowed_variance(e: &[f64], d: Dims, window: usize) -> Vec<f64> {
    let half = (window / 2) as isize;
    let n = (window * window) as f64;
    let clamp = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;
    let mut out = vec![0.0; e.len()];
    for l in 0..d.bands {
        for r in 0..d.height {
            for c in 0..d.width {
                let (mut s, mut s2) = (0.0, 0.0);
                for dr in -half..=half {
                    let rr = clamp(r as isize + dr, d.height);
                    for dc in -half..=half {
                        let cc = clamp(c as isize + dc, d.width);
                        let v = e[d.index(l, rr, cc)];
                        s += v;
                        s2 += v * v;
                    }
                }
                let mean = s / n;
                out[d.index(l, r, c)] = (s2 / n - mean * mean).max(0.0);
            }
        }
    }
    out
}
