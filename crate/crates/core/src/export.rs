//! 8-bit grayscale PNG export of single bands.

use std::path::Path;

use image::GrayImage;

use crate::cube::HsiCube;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandScaling {
    /// Map the band's own `[min, max]` onto `[0, 255]`.
    MinMax,
    /// Map `[0, peak]` onto `[0, 255]`, clamping outside values.
    Fixed { peak: f32 },
}

/// Quantise one value in `[0, 1]` to 8 bits, rounding half away from zero.
#[inline]
pub fn quantize(unit: f64) -> u8 {
    (unit.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn band_to_gray(cube: &HsiCube, band: usize, scaling: BandScaling) -> Result<GrayImage> {
    let d = cube.dims();
    if band >= d.bands {
        return Err(Error::Bounds(format!(
            "band {band} out of range for {} bands",
            d.bands
        )));
    }
    let plane = cube.band(band);
    let pixels: Vec<u8> = match scaling {
        BandScaling::Fixed { peak } => {
            if !(peak.is_finite() && peak > 0.0) {
                return Err(Error::param(format!("peak must be positive, got {peak}")));
            }
            plane
                .iter()
                .map(|&v| quantize(v as f64 / peak as f64))
                .collect()
        }
        BandScaling::MinMax => {
            let lo = plane.iter().copied().fold(f32::INFINITY, f32::min) as f64;
            let hi = plane.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
            let span = hi - lo;
            plane
                .iter()
                .map(|&v| {
                    if span > 0.0 {
                        quantize((v as f64 - lo) / span)
                    } else {
                        0
                    }
                })
                .collect()
        }
    };
    GrayImage::from_raw(d.width as u32, d.height as u32, pixels)
        .ok_or_else(|| Error::Image("buffer size mismatch".into()))
}

pub fn export_band(
    cube: &HsiCube,
    band: usize,
    scaling: BandScaling,
    path: impl AsRef<Path>,
) -> Result<()> {
    let img = band_to_gray(cube, band, scaling)?;
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::Io(io),
            other => Error::Image(other.to_string()),
        })
}
