//! Spatially-variant separable 3D filters for the local means.
//!
//! Every pixel owns three length-`q` kernels: one along rows, one along
//! columns and one along bands. Its full `q x q x q` kernel is their tensor
//! product, but only the `3q` factors are ever stored. Borders use
//! replicate padding on every axis.

use rayon::prelude::*;

use crate::cube::{Dims, HsiCube};
use crate::error::{Error, Result};

pub const DEFAULT_Q: usize = 7;
pub const DEFAULT_BANDWIDTH: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Row,
    Col,
    Band,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparableFilterField {
    dims: Dims,
    q: usize,
    rows: Vec<f32>,
    cols: Vec<f32>,
    spectral: Vec<f32>,
}

impl SeparableFilterField {
    /// Field of center-delta filters: local means reproduce the input.
    pub fn identity(dims: Dims, q: usize) -> Result<Self> {
        check_length(q)?;
        let mut tap = vec![0.0f32; q];
        tap[q / 2] = 1.0;
        let all: Vec<f32> = tap.iter().copied().cycle().take(q * dims.len()).collect();
        Ok(SeparableFilterField {
            dims,
            q,
            rows: all.clone(),
            cols: all.clone(),
            spectral: all,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn filter(&self, axis: Axis, pixel: usize) -> &[f32] {
        let store = match axis {
            Axis::Row => &self.rows,
            Axis::Col => &self.cols,
            Axis::Band => &self.spectral,
        };
        &store[pixel * self.q..(pixel + 1) * self.q]
    }

    /// Number of stored coefficients: always `3 * q * N`.
    pub fn coefficient_count(&self) -> usize {
        self.rows.len() + self.cols.len() + self.spectral.len()
    }
}

fn check_length(q: usize) -> Result<()> {
    if q == 0 || q.is_multiple_of(2) {
        return Err(Error::param(format!(
            "filter length must be odd and >= 1, got {q}"
        )));
    }
    Ok(())
}

#[inline]
fn clamp_index(base: usize, offset: isize, len: usize) -> usize {
    (base as isize + offset).clamp(0, len as isize - 1) as usize
}

/// Range-similarity kernels: tap `j` along each axis is weighted by
/// `exp(-(x_i - x_{i+j})^2 / (2 h^2))`, then normalised to sum to one.
pub fn build_filters(x: &HsiCube, q: usize, bandwidth: f64) -> Result<SeparableFilterField> {
    check_length(q)?;
    let d = x.dims();
    let longest = 2 * d.height.min(d.width).min(d.bands) - 1;
    if q > longest {
        return Err(Error::param(format!(
            "filter length {q} exceeds {longest} for a {d} cube"
        )));
    }
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::param(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let half = (q / 2) as isize;
    let inv = 1.0 / (2.0 * bandwidth * bandwidth);
    let data = x.data();

    let build_axis = |axis: Axis| -> Vec<f32> {
        let mut out = vec![0.0f32; d.len() * q];
        out.par_chunks_mut(d.plane() * q)
            .enumerate()
            .for_each(|(l, band_out)| {
                let mut w = vec![0.0f64; q];
                for r in 0..d.height {
                    for c in 0..d.width {
                        let centre = data[d.index(l, r, c)] as f64;
                        for (k, wk) in w.iter_mut().enumerate() {
                            let off = k as isize - half;
                            let idx = match axis {
                                Axis::Row => d.index(l, clamp_index(r, off, d.height), c),
                                Axis::Col => d.index(l, r, clamp_index(c, off, d.width)),
                                Axis::Band => d.index(clamp_index(l, off, d.bands), r, c),
                            };
                            let diff = centre - data[idx] as f64;
                            *wk = (-diff * diff * inv).exp();
                        }
                        let total: f64 = w.iter().sum();
                        let dst = &mut band_out[(r * d.width + c) * q..(r * d.width + c + 1) * q];
                        for (o, wk) in dst.iter_mut().zip(&w) {
                            *o = (wk / total) as f32;
                        }
                    }
                }
            });
        out
    };

    Ok(SeparableFilterField {
        dims: d,
        q,
        rows: build_axis(Axis::Row),
        cols: build_axis(Axis::Col),
        spectral: build_axis(Axis::Band),
    })
}

/// Local means `u_i = K_i . x_i`, contracting the replicate-padded
/// neighbourhood one axis at a time (bands, then columns, then rows) with
/// pixel `i`'s own factors.
pub fn local_mean(x: &HsiCube, field: &SeparableFilterField) -> Result<Vec<f32>> {
    let d = x.dims();
    if field.dims != d {
        return Err(Error::shape(format!(
            "filter field is {} but cube is {d}",
            field.dims
        )));
    }
    let q = field.q;
    let half = (q / 2) as isize;
    let data = x.data();
    let mut out = vec![0.0f32; d.len()];
    out.par_chunks_mut(d.plane())
        .enumerate()
        .for_each(|(l, band_out)| {
            let bands: Vec<usize> = (0..q)
                .map(|k| clamp_index(l, k as isize - half, d.bands))
                .collect();
            for r in 0..d.height {
                for c in 0..d.width {
                    let pixel = d.index(l, r, c);
                    let (rf, cf, sf) = (
                        field.filter(Axis::Row, pixel),
                        field.filter(Axis::Col, pixel),
                        field.filter(Axis::Band, pixel),
                    );
                    let mut acc_rows = 0.0f64;
                    for (a, &ra) in rf.iter().enumerate() {
                        let rr = clamp_index(r, a as isize - half, d.height);
                        let mut acc_cols = 0.0f64;
                        for (b, &cb) in cf.iter().enumerate() {
                            let cc = clamp_index(c, b as isize - half, d.width);
                            let base = rr * d.width + cc;
                            let spectral: f64 = sf
                                .iter()
                                .zip(&bands)
                                .map(|(&s, &ll)| s as f64 * data[ll * d.plane() + base] as f64)
                                .sum();
                            acc_cols += cb as f64 * spectral;
                        }
                        acc_rows += ra as f64 * acc_cols;
                    }
                    band_out[r * d.width + c] = acc_rows as f32;
                }
            }
        });
    Ok(out)
}

/// Dense `q x q x q` kernel, indexed `[row_tap][col_tap][band_tap]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel3 {
    q: usize,
    data: Vec<f64>,
}

impl Kernel3 {
    pub fn q(&self) -> usize {
        self.q
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, s: usize) -> f64 {
        self.data[(a * self.q + b) * self.q + s]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

/// Tensor product `r (x) c (x) s` of three equal-length 1D filters.
pub fn compose_full(r: &[f32], c: &[f32], s: &[f32]) -> Result<Kernel3> {
    if r.len() != c.len() || r.len() != s.len() || r.is_empty() {
        return Err(Error::shape(format!(
            "1D filters must share a nonzero length, got {}, {}, {}",
            r.len(),
            c.len(),
            s.len()
        )));
    }
    let q = r.len();
    let mut data = Vec::with_capacity(q * q * q);
    for &ra in r {
        for &cb in c {
            for &sd in s {
                data.push(ra as f64 * cb as f64 * sd as f64);
            }
        }
    }
    Ok(Kernel3 { q, data })
}
