//! PSNR and SSIM for spectral cubes.
//!
//! SSIM uses the usual 11x11 Gaussian window (std 1.5) with `K1 = 0.01`,
//! `K2 = 0.03`, evaluated only where the window fits ("valid" region), per
//! band, then averaged over bands.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::cube::{Dims, HsiCube};
use crate::error::{Error, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_pair(a: &HsiCube, b: &HsiCube, peak: f64) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::shape(format!(
            "cubes differ: {} vs {}",
            a.dims(),
            b.dims()
        )));
    }
    if !(peak.is_finite() && peak > 0.0) {
        return Err(Error::param(format!("peak must be positive, got {peak}")));
    }
    Ok(())
}

fn mse(a: &[f32], b: &[f32]) -> f64 {
    let s: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let e = x as f64 - y as f64;
            e * e
        })
        .sum();
    s / a.len() as f64
}

/// `10 log10(peak^2 / MSE)`; `+inf` when the cubes are identical.
pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

/// PSNR over all `H*W*L` elements.
pub fn psnr(a: &HsiCube, b: &HsiCube, peak: f64) -> Result<f64> {
    check_pair(a, b, peak)?;
    Ok(psnr_from_mse(mse(a.data(), b.data()), peak))
}

pub fn psnr_bands(a: &HsiCube, b: &HsiCube, peak: f64) -> Result<Vec<f64>> {
    check_pair(a, b, peak)?;
    Ok((0..a.dims().bands)
        .map(|l| psnr_from_mse(mse(a.band(l), b.band(l)), peak))
        .collect())
}

/// Mean of per-band PSNRs.
pub fn psnr_per_band(a: &HsiCube, b: &HsiCube, peak: f64) -> Result<f64> {
    let v = psnr_bands(a, b, peak)?;
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut taps = [0.0; SSIM_WINDOW];
    for (k, t) in taps.iter_mut().enumerate() {
        let x = k as f64 - half;
        *t = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

/// Separable "valid" Gaussian blur of an `h x w` image.
fn blur_valid(img: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let n = taps.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut horiz = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            horiz[r * ow + c] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * img[r * w + c + k])
                .sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * horiz[(r + k) * ow + c])
                .sum();
        }
    }
    out
}

fn ssim_plane(a: &[f32], b: &[f32], h: usize, w: usize, peak: f64) -> f64 {
    let taps = gaussian_taps();
    let a64: Vec<f64> = a.iter().map(|&v| v as f64).collect();
    let b64: Vec<f64> = b.iter().map(|&v| v as f64).collect();
    let aa: Vec<f64> = a64.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b64.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a64.iter().zip(&b64).map(|(x, y)| x * y).collect();
    let mu_a = blur_valid(&a64, h, w, &taps);
    let mu_b = blur_valid(&b64, h, w, &taps);
    let e_aa = blur_valid(&aa, h, w, &taps);
    let e_bb = blur_valid(&bb, h, w, &taps);
    let e_ab = blur_valid(&ab, h, w, &taps);
    let c1 = (SSIM_K1 * peak).powi(2);
    let c2 = (SSIM_K2 * peak).powi(2);
    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    (total / mu_a.len() as f64).clamp(-1.0, 1.0)
}

fn check_window(d: Dims) -> Result<()> {
    if d.height < SSIM_WINDOW || d.width < SSIM_WINDOW {
        return Err(Error::param(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, cube is {d}"
        )));
    }
    Ok(())
}

pub fn ssim_bands(a: &HsiCube, b: &HsiCube, peak: f64) -> Result<Vec<f64>> {
    check_pair(a, b, peak)?;
    let d = a.dims();
    check_window(d)?;
    Ok((0..d.bands)
        .into_par_iter()
        .map(|l| ssim_plane(a.band(l), b.band(l), d.height, d.width, peak))
        .collect())
}

/// Mean of per-band 2D SSIM.
pub fn ssim(a: &HsiCube, b: &HsiCube, peak: f64) -> Result<f64> {
    let v = ssim_bands(a, b, peak)?;
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    /// Whole-cube PSNR in dB (`+inf` for identical cubes).
    pub psnr_db: f64,
    /// Mean of per-band SSIM.
    pub ssim: f64,
    pub band_psnr_db: Vec<f64>,
    pub band_ssim: Vec<f64>,
}

impl MetricReport {
    pub fn evaluate(reference: &HsiCube, estimate: &HsiCube, peak: f64) -> Result<Self> {
        let band_ssim = ssim_bands(reference, estimate, peak)?;
        Ok(MetricReport {
            psnr_db: psnr(reference, estimate, peak)?,
            ssim: band_ssim.iter().sum::<f64>() / band_ssim.len() as f64,
            band_psnr_db: psnr_bands(reference, estimate, peak)?,
            band_ssim,
        })
    }

    pub fn mean_band_psnr(&self) -> f64 {
        self.band_psnr_db.iter().sum::<f64>() / self.band_psnr_db.len() as f64
    }

    /// `band,psnr_db,ssim` rows per band, then an `all` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("band,psnr_db,ssim\n");
        for (l, (p, q)) in self.band_psnr_db.iter().zip(&self.band_ssim).enumerate() {
            let _ = writeln!(s, "{l},{},{}", fmt_db(*p), q);
        }
        let _ = writeln!(s, "all,{},{}", fmt_db(self.psnr_db), self.ssim);
        s
    }

    pub fn summary(&self) -> String {
        format!(
            "PSNR {} dB (band mean {}), SSIM {:.4}",
            fmt_db_short(self.psnr_db),
            fmt_db_short(self.mean_band_psnr()),
            self.ssim
        )
    }
}

fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        v.to_string()
    }
}

fn fmt_db_short(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.2}")
    }
}
