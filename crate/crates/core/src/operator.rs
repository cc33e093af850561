//! The CASSI measurement operator: modulate by the coded aperture, shift
//! band `l` right by `step * l` columns, sum over bands.

use rayon::prelude::*;

use crate::cube::{Dims, HsiCube, Mask2D, Measurement};
use crate::error::{Error, Result};

/// Largest `H*W*L` for which [`ForwardOperator::dense_oracle`] will build a matrix.
pub const DENSE_ORACLE_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOperator {
    mask: Mask2D,
    bands: usize,
    step: usize,
}

impl ForwardOperator {
    pub fn new(mask: Mask2D, bands: usize, step: usize) -> Result<Self> {
        if bands == 0 {
            return Err(Error::param("operator needs at least one band"));
        }
        step.checked_mul(bands - 1)
            .and_then(|s| s.checked_add(mask.width()))
            .ok_or_else(|| Error::param("sensor width overflows"))?;
        Ok(ForwardOperator { mask, bands, step })
    }

    pub fn mask(&self) -> &Mask2D {
        &self.mask
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn cube_dims(&self) -> Dims {
        Dims {
            height: self.mask.height(),
            width: self.mask.width(),
            bands: self.bands,
        }
    }

    /// Sensor width `W + step * (L - 1)`.
    pub fn sensor_width(&self) -> usize {
        self.mask.width() + self.step * (self.bands - 1)
    }

    /// Column offset of band `l` (zero-based).
    #[inline]
    pub fn shift(&self, band: usize) -> usize {
        self.step * band
    }

    pub fn check_cube(&self, cube: &HsiCube) -> Result<()> {
        if cube.dims() != self.cube_dims() {
            return Err(Error::shape(format!(
                "cube is {} but operator expects {}",
                cube.dims(),
                self.cube_dims()
            )));
        }
        Ok(())
    }

    pub fn check_measurement(&self, meas: &Measurement) -> Result<()> {
        if meas.height() != self.mask.height()
            || meas.width() != self.sensor_width()
            || meas.bands() != self.bands
            || meas.step() != self.step
        {
            return Err(Error::shape(format!(
                "measurement is {}x{} (step {}, {} bands) but operator expects {}x{} (step {}, {} bands)",
                meas.height(),
                meas.width(),
                meas.step(),
                meas.bands(),
                self.mask.height(),
                self.sensor_width(),
                self.step,
                self.bands
            )));
        }
        Ok(())
    }

    /// `y = A x`.
    pub fn forward(&self, cube: &HsiCube) -> Result<Measurement> {
        self.check_cube(cube)?;
        let data = self.forward_raw(cube.data());
        Measurement::new(
            self.mask.height(),
            self.sensor_width(),
            self.step,
            self.bands,
            data,
        )
    }

    /// `A x` on a raw band-major slice; no validation beyond length.
    pub(crate) fn forward_raw(&self, x: &[f32]) -> Vec<f32> {
        let d = self.cube_dims();
        debug_assert_eq!(x.len(), d.len());
        let wm = self.sensor_width();
        let mut out = vec![0.0f32; d.height * wm];
        out.par_chunks_mut(wm).enumerate().for_each(|(r, row_out)| {
            let mut acc = vec![0.0f64; wm];
            let mask_row = &self.mask.data()[r * d.width..(r + 1) * d.width];
            for l in 0..d.bands {
                let src = &x[d.index(l, r, 0)..d.index(l, r, 0) + d.width];
                let dst = &mut acc[self.shift(l)..self.shift(l) + d.width];
                for ((a, &m), &v) in dst.iter_mut().zip(mask_row).zip(src) {
                    *a += m as f64 * v as f64;
                }
            }
            for (o, a) in row_out.iter_mut().zip(acc) {
                *o = a as f32;
            }
        });
        out
    }

    /// `A^T y`: band `l` is the mask-weighted window of `y` starting at column `step * l`.
    pub fn adjoint(&self, meas: &Measurement) -> Result<HsiCube> {
        self.check_measurement(meas)?;
        HsiCube::from_vec(self.cube_dims(), self.adjoint_raw(meas.data()))
    }

    pub(crate) fn adjoint_raw(&self, y: &[f32]) -> Vec<f32> {
        let d = self.cube_dims();
        let wm = self.sensor_width();
        debug_assert_eq!(y.len(), d.height * wm);
        let mut out = vec![0.0f32; d.len()];
        out.par_chunks_mut(d.plane())
            .enumerate()
            .for_each(|(l, band)| {
                let off = self.shift(l);
                for r in 0..d.height {
                    let window = &y[r * wm + off..r * wm + off + d.width];
                    let mask_row = &self.mask.data()[r * d.width..(r + 1) * d.width];
                    let dst = &mut band[r * d.width..(r + 1) * d.width];
                    for ((o, &m), &v) in dst.iter_mut().zip(mask_row).zip(window) {
                        *o = m * v;
                    }
                }
            });
        out
    }

    /// Explicit `M x N` matrix built directly from the mask and shifts.
    ///
    /// Row index is `r * Wm + c'`, column index is `l * H * W + r * W + c`.
    pub fn dense_oracle(&self) -> Result<DenseMatrix> {
        let d = self.cube_dims();
        if d.len() > DENSE_ORACLE_LIMIT {
            return Err(Error::Refused(format!(
                "dense matrix for N = {} exceeds the limit of {DENSE_ORACLE_LIMIT}",
                d.len()
            )));
        }
        let wm = self.sensor_width();
        let mut m = DenseMatrix::zeros(d.height * wm, d.len());
        for l in 0..d.bands {
            for r in 0..d.height {
                for c in 0..d.width {
                    let row = r * wm + c + self.shift(l);
                    m.set(row, d.index(l, r, c), self.mask.get(r, c) as f64);
                }
            }
        }
        Ok(m)
    }
}

/// Row-major dense matrix, 64-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matvec_transposed(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &yr) in y.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += a * yr;
            }
        }
        out
    }
}
