//! Hyperspectral cubes, coded-aperture masks and sensor measurements.
//!
//! Cubes are stored band-major planar: element `(band, row, col)` lives at
//! `band * height * width + row * width + col`, so a single band is one
//! contiguous `height * width` slice.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Spatial/spectral extent of a cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
}

impl Dims {
    pub fn new(height: usize, width: usize, bands: usize) -> Result<Self> {
        if height == 0 || width == 0 || bands == 0 {
            return Err(Error::param(format!(
                "cube dimensions must be positive, got {height}x{width}x{bands}"
            )));
        }
        height
            .checked_mul(width)
            .and_then(|p| p.checked_mul(bands))
            .ok_or_else(|| Error::param("cube dimensions overflow"))?;
        Ok(Dims {
            height,
            width,
            bands,
        })
    }

    #[inline]
    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.height * self.width * self.bands
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, band: usize, row: usize, col: usize) -> usize {
        band * self.plane() + row * self.width + col
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.bands)
    }
}

/// A 3D spectral data cube (`H x W x L`) of 32-bit intensities.
///
/// Two constructors exist: [`HsiCube::ingest`] is the boundary used for
/// external data and clamps into `[0, peak]`; [`HsiCube::from_vec`] only
/// rejects non-finite values and is used for solver iterates, adjoint
/// images and other intermediate fields that may leave that range.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    dims: Dims,
    data: Vec<f32>,
    peak: f32,
}

pub const DEFAULT_PEAK: f32 = 1.0;

impl HsiCube {
    pub fn zeros(dims: Dims) -> Self {
        HsiCube {
            dims,
            data: vec![0.0; dims.len()],
            peak: DEFAULT_PEAK,
        }
    }

    pub fn filled(dims: Dims, value: f32) -> Self {
        HsiCube {
            dims,
            data: vec![value; dims.len()],
            peak: DEFAULT_PEAK,
        }
    }

    pub fn from_vec(dims: Dims, data: Vec<f32>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::shape(format!(
                "cube {dims} needs {} values, got {}",
                dims.len(),
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("cube element {pos}")));
        }
        Ok(HsiCube {
            dims,
            data,
            peak: DEFAULT_PEAK,
        })
    }

    /// Validate external data: rejects NaN/Inf and clamps into `[0, peak]`.
    pub fn ingest(dims: Dims, mut data: Vec<f32>, peak: f32) -> Result<Self> {
        if !(peak.is_finite() && peak > 0.0) {
            return Err(Error::param(format!("peak must be positive, got {peak}")));
        }
        if data.len() != dims.len() {
            return Err(Error::shape(format!(
                "cube {dims} needs {} values, got {}",
                dims.len(),
                data.len()
            )));
        }
        for (i, v) in data.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("cube element {i}")));
            }
            *v = v.clamp(0.0, peak);
        }
        Ok(HsiCube { dims, data, peak })
    }

    pub fn with_peak(mut self, peak: f32) -> Self {
        self.peak = peak;
        self
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn peak(&self) -> f32 {
        self.peak
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, band: usize, row: usize, col: usize) -> f32 {
        self.data[self.dims.index(band, row, col)]
    }

    pub fn band(&self, band: usize) -> &[f32] {
        let p = self.dims.plane();
        &self.data[band * p..(band + 1) * p]
    }

    pub fn max_value(&self) -> f32 {
        self.data.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }

    /// Copy an `h x w` spatial window starting at `(row, col)`, all bands.
    pub fn extract_patch(&self, origin: (usize, usize), size: (usize, usize)) -> Result<HsiCube> {
        let (r0, c0) = origin;
        let (h, w) = size;
        let fits = h > 0
            && w > 0
            && r0.checked_add(h).is_some_and(|e| e <= self.dims.height)
            && c0.checked_add(w).is_some_and(|e| e <= self.dims.width);
        if !fits {
            return Err(Error::Bounds(format!(
                "patch {h}x{w} at ({r0},{c0}) does not fit in {}",
                self.dims
            )));
        }
        let dims = Dims::new(h, w, self.dims.bands)?;
        let mut data = Vec::with_capacity(dims.len());
        for l in 0..self.dims.bands {
            for r in r0..r0 + h {
                let start = self.dims.index(l, r, c0);
                data.extend_from_slice(&self.data[start..start + w]);
            }
        }
        Ok(HsiCube {
            dims,
            data,
            peak: self.peak,
        })
    }
}

/// Coded aperture: per-pixel transmittance in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask2D {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Mask2D {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::param("mask dimensions must be positive"));
        }
        if data.len() != height * width {
            return Err(Error::shape(format!(
                "mask {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("mask element {pos}")));
        }
        if let Some(pos) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::param(format!(
                "mask element {pos} = {} outside [0, 1]",
                data[pos]
            )));
        }
        Ok(Mask2D {
            height,
            width,
            data,
        })
    }

    pub fn ones(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![1.0; height * width])
    }

    /// Random 0/1 aperture with open probability `fill`.
    pub fn random_binary(height: usize, width: usize, fill: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fill) {
            return Err(Error::param(format!("fill {fill} outside [0, 1]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..height * width)
            .map(|_| if rng.random_bool(fill) { 1.0 } else { 0.0 })
            .collect();
        Self::new(height, width, data)
    }

    /// Random transmittances drawn uniformly from `[0, 1)`.
    pub fn random_uniform(height: usize, width: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..height * width).map(|_| rng.random::<f32>()).collect();
        Self::new(height, width, data)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.width + col]
    }
}

/// 2D sensor image of width `W + step * (L - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    height: usize,
    width: usize,
    step: usize,
    bands: usize,
    data: Vec<f32>,
}

impl Measurement {
    pub fn new(
        height: usize,
        width: usize,
        step: usize,
        bands: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        if height == 0 || width == 0 || bands == 0 {
            return Err(Error::param("measurement dimensions must be positive"));
        }
        let spread = step
            .checked_mul(bands - 1)
            .ok_or_else(|| Error::param("dispersion overflow"))?;
        if width <= spread {
            return Err(Error::shape(format!(
                "measurement width {width} leaves no scene columns for step {step} and {bands} bands"
            )));
        }
        if data.len() != height * width {
            return Err(Error::shape(format!(
                "measurement {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("measurement element {pos}")));
        }
        Ok(Measurement {
            height,
            width,
            step,
            bands,
            data,
        })
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Sensor width `Wm`.
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn step(&self) -> usize {
        self.step
    }

    #[inline]
    pub fn bands(&self) -> usize {
        self.bands
    }

    /// Width of the scene that produced this measurement.
    #[inline]
    pub fn scene_width(&self) -> usize {
        self.width - self.step * (self.bands - 1)
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn max_value(&self) -> f32 {
        self.data.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }
}
