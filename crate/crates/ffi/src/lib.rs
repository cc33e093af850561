//! C ABI over `cassi_gsm`.
//!
//! Objects cross the boundary as opaque heap handles created by a
//! `*_new`/`*_load`/producer call and released with the matching `*_free`.
//! Every fallible function returns a [`CassiStatus`]; on failure a
//! description is available from [`cassi_last_error`] on the same thread.
//! Panics are caught at the boundary and reported as `CASSI_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cassi_gsm::metrics;
use cassi_gsm::noise::{self, NoiseModel};
use cassi_gsm::scene::{self, SceneSpec};
use cassi_gsm::solver;
use cassi_gsm::{io, Dims, Error, ErrorKind, ForwardOperator, HsiCube, InitMode, Mask2D};
use cassi_gsm::{Measurement, ScalePrior, SolverConfig, StepRule};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CassiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Shape = 4,
    Divergence = 5,
    Panic = 6,
}

/// Hyperspectral cube, band-major `f32` samples.
pub struct CassiCube(HsiCube);

/// Coded aperture transmittances in `[0, 1]`, row-major.
pub struct CassiMask(Mask2D);

/// Sensor image plus the dispersion geometry that produced it.
pub struct CassiMeasurement(Measurement);

/// Plain-data solver settings; obtain defaults from
/// [`cassi_solver_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CassiSolverOptions {
    pub stages: usize,
    pub inner_steps: usize,
    /// Initial backtracking step size.
    pub delta0: f64,
    /// Backtracking shrink factor in `(0, 1)`.
    pub shrink: f64,
    pub sigma: f64,
    /// Jeffreys prior stabiliser.
    pub eps: f64,
    pub q: usize,
    pub bandwidth: f64,
    /// Nonzero to start from zero instead of the scaled adjoint.
    pub zero_init: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CassiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            CassiStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            CassiStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_last_error(msg);
            CassiStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            match e.kind() {
                ErrorKind::Usage => CassiStatus::InvalidArgument,
                ErrorKind::InputOutput => CassiStatus::Io,
                ErrorKind::Shape => CassiStatus::Shape,
                ErrorKind::Divergence => CassiStatus::Divergence,
            }
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            CassiStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out_slot<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Failure> {
    if p.is_null() {
        return Err(Failure::Null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Failure::Invalid("path is not valid UTF-8".into()))
}

unsafe fn samples(p: *const f32, len: usize, what: &'static str) -> Result<Vec<f32>, Failure> {
    if len == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len).to_vec())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message for the most recent failure on this thread, or null after a
/// success. Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn cassi_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Copy `height * width * bands` samples from `data` (band-major), or zeros
/// if `data` is null.
///
/// # Safety
/// `data` must be null or point to that many readable floats; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn cassi_cube_new(
    height: usize,
    width: usize,
    bands: usize,
    data: *const f32,
    out: *mut *mut CassiCube,
) -> CassiStatus {
    guard(|| {
        let out = out_slot(out, "out")?;
        let dims = Dims::new(height, width, bands)?;
        let cube = if data.is_null() {
            HsiCube::zeros(dims)
        } else {
            HsiCube::from_vec(dims, samples(data, dims.len(), "data")?)?
        };
        *out = boxed(CassiCube(cube));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cassi_cube_load(
    path: *const c_char,
    out: *mut *mut CassiCube,
) -> CassiStatus {
    guard(|| {
        let out = out_slot(out, "out")?;
        *out = boxed(CassiCube(io::load_cube(path_arg(path)?)?));
        Ok(())
    })
}

/// # Safety
/// `cube` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cassi_cube_save(
    cube: *const CassiCube,
    path: *const c_char,
) -> CassiStatus {
    guard(|| {
        io::save_cube(&borrow(cube, "cube")?.0, path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `cube` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn cassi_cube_dims(
    cube: *const CassiCube,
    height: *mut usize,
    width: *mut usize,
    bands: *mut usize,
) -> CassiStatus {
    guard(|| {
        let d = borrow(cube, "cube")?.0.dims();
        *out_slot(height, "height")? = d.height;
        *out_slot(width, "width")? = d.width;
        *out_slot(bands, "bands")? = d.bands;
        Ok(())
    })
}

/// Band-major samples owned by the handle; null if `cube` is null.
///
/// # Safety
/// `cube` must be null or a live handle. The pointer dies with the handle.
#[no_mangle]
pub unsafe extern "C" fn cassi_cube_data(cube: *const CassiCube) -> *const f32 {
    cube.as_ref().map_or(ptr::null(), |c| c.0.data().as_ptr())
}

/// # Safety
/// `cube` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cassi_cube_free(cube: *mut CassiCube) {
    free(cube)
}

/// # Safety
/// `data` must point to `height * width` readable floats; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn cassi_mask_new(
    height: usize,
    width: usize,
    data: *const f32,
    out: *mut *mut CassiMask,
) -> CassiStatus {
    guard(|| {
        let out = out_slot(out, "out")?;
        let len = height
            .checked_mul(width)
            .ok_or_else(|| Failure::Invalid("mask size overflows".into()))?;
        let mask = Mask2D::new(height, width, samples(data, len, "data")?)?;
        *out = boxed(CassiMask(mask));
        Ok(())
    })
}

/// Seeded binary mask with roughly `fill` of its pixels open.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cassi_mask_random_binary(
    height: usize,
    width: usize,
    fill: f64,
    seed: u64,
    out: *mut *mut CassiMask,
) -> CassiStatus {
    guard(|| {
        let out = out_slot(out, "out")?;
        *out = boxed(CassiMask(Mask2D::random_binary(height, width, fill, seed)?));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cassi_mask_load(
    path: *const c_char,
    out: *mut *mut CassiMask,
) -> CassiStatus {
    guard(|| {
        let out = out_slot(out, "out")?;
        *out = boxed(CassiMask(io::load_mask(path_arg(path)?)?));
        Ok(())
    })
}

/// # Safety
/// `mask` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cassi_mask_save(
    mask: *const CassiMask,
    path: *const c_char,
) -> CassiStatus {
    guard(|| {
        io::save_mask(&borrow(mask, "mask")?.0, path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `mask` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cassi_mask_free(mask: *mut CassiMask) {
    free(mask)
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cassi_measurement_load(
    path: *const c_char,
    out: *mut *mut CassiMeasurement,
) -> CassiStatus {
    guard(|| {
        let out = out_slot(out, "out")?;
        *out = boxed(CassiMeasurement(io::load_measurement(path_arg(path)?)?));
        Ok(())
    })
}

/// # Safety
/// `meas` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cassi_measurement_save(
    meas: *const CassiMeasurement,
    path: *const c_char,
) -> CassiStatus {
    guard(|| {
        io::save_measurement(&borrow(meas, "measurement")?.0, path_arg(path)?)?;
        Ok(())
    })
}

/// Sensor height and width, dispersion step and band count.
///
/// # Safety
/// `meas` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn cassi_measurement_dims(
    meas: *const CassiMeasurement,
    height: *mut usize,
    width: *mut usize,
    step: *mut usize,
    bands: *mut usize,
) -> CassiStatus {
    guard(|| {
        let m = &borrow(meas, "measurement")?.0;
        *out_slot(height, "height")? = m.height();
        *out_slot(width, "width")? = m.width();
        *out_slot(step, "step")? = m.step();
        *out_slot(bands, "bands")? = m.bands();
        Ok(())
    })
}

/// Row-major sensor samples owned by the handle; null if `meas` is null.
///
/// # Safety
/// `meas` must be null or a live handle. The pointer dies with the handle.
#[no_mangle]
pub unsafe extern "C" fn cassi_measurement_data(meas: *const CassiMeasurement) -> *const f32 {
    meas.as_ref().map_or(ptr::null(), |m| m.0.data().as_ptr())
}

/// # Safety
/// `meas` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cassi_measurement_free(meas: *mut CassiMeasurement) {
    free(meas)
}

/// Seeded synthetic scene of Gaussian blobs.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cassi_scene_generate(
    height: usize,
    width: usize,
    bands: usize,
    blobs: usize,
    seed: u64,
    out: *mut *mut CassiCube,
) -> CassiStatus {
    guard(|| {
        let out = out_slot(out, "out")?;
        let spec = SceneSpec::new(Dims::new(height, width, bands)?, blobs, seed);
        *out = boxed(CassiCube(scene::generate_scene(&spec)?));
        Ok(())
    })
}

/// Forward model: mask, disperse by `step` pixels per band, integrate.
///
/// # Safety
/// `cube` and `mask` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cassi_simulate(
    cube: *const CassiCube,
    mask: *const CassiMask,
    step: usize,
    out: *mut *mut CassiMeasurement,
) -> CassiStatus {
    guard(|| {
        let cube = &borrow(cube, "cube")?.0;
        let mask = borrow(mask, "mask")?.0.clone();
        let out = out_slot(out, "out")?;
        let op = ForwardOperator::new(mask, cube.dims().bands, step)?;
        *out = boxed(CassiMeasurement(op.forward(cube)?));
        Ok(())
    })
}

/// Transpose of the forward model.
///
/// # Safety
/// `meas` and `mask` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cassi_adjoint(
    meas: *const CassiMeasurement,
    mask: *const CassiMask,
    out: *mut *mut CassiCube,
) -> CassiStatus {
    guard(|| {
        let meas = &borrow(meas, "measurement")?.0;
        let op = ForwardOperator::new(borrow(mask, "mask")?.0.clone(), meas.bands(), meas.step())?;
        let out = out_slot(out, "out")?;
        *out = boxed(CassiCube(op.adjoint(meas)?));
        Ok(())
    })
}

/// Poisson photon noise at `bits` of depth, full scale at the image maximum.
///
/// # Safety
/// `meas` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cassi_add_shot_noise(
    meas: *const CassiMeasurement,
    bits: u32,
    seed: u64,
    out: *mut *mut CassiMeasurement,
) -> CassiStatus {
    guard(|| {
        let meas = &borrow(meas, "measurement")?.0;
        let out = out_slot(out, "out")?;
        let noisy = noise::add_noise(meas, &NoiseModel::shot(bits, seed))?;
        *out = boxed(CassiMeasurement(noisy));
        Ok(())
    })
}

/// Additive Gaussian noise, clamped at zero.
///
/// # Safety
/// `meas` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cassi_add_gaussian_noise(
    meas: *const CassiMeasurement,
    sigma: f64,
    seed: u64,
    out: *mut *mut CassiMeasurement,
) -> CassiStatus {
    guard(|| {
        let meas = &borrow(meas, "measurement")?.0;
        let out = out_slot(out, "out")?;
        let noisy = noise::add_noise(meas, &NoiseModel::gaussian(sigma, seed))?;
        *out = boxed(CassiMeasurement(noisy));
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn cassi_solver_options_default() -> CassiSolverOptions {
    let cfg = SolverConfig::default();
    let (delta0, shrink) = match cfg.step {
        StepRule::Backtracking { initial, shrink } => (initial, shrink),
        StepRule::Fixed(d) => (d, 0.5),
    };
    let eps = match cfg.prior {
        ScalePrior::Jeffreys { eps } => eps,
        _ => cassi_gsm::prior::DEFAULT_EPS,
    };
    CassiSolverOptions {
        stages: cfg.stages,
        inner_steps: cfg.inner_steps,
        delta0,
        shrink,
        sigma: cfg.sigma,
        eps,
        q: cfg.q,
        bandwidth: cfg.bandwidth,
        zero_init: 0,
    }
}

/// Reconstruct with the Jeffreys-prior solver. Null `options` means defaults.
///
/// # Safety
/// `meas` and `mask` must be live handles, `options` null or readable, and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cassi_reconstruct(
    meas: *const CassiMeasurement,
    mask: *const CassiMask,
    options: *const CassiSolverOptions,
    out: *mut *mut CassiCube,
) -> CassiStatus {
    guard(|| {
        let meas = &borrow(meas, "measurement")?.0;
        let op = ForwardOperator::new(borrow(mask, "mask")?.0.clone(), meas.bands(), meas.step())?;
        let o = options
            .as_ref()
            .copied()
            .unwrap_or_else(|| cassi_solver_options_default());
        let out = out_slot(out, "out")?;
        let cfg = SolverConfig {
            stages: o.stages,
            inner_steps: o.inner_steps,
            step: StepRule::Backtracking {
                initial: o.delta0,
                shrink: o.shrink,
            },
            sigma: o.sigma,
            prior: ScalePrior::Jeffreys { eps: o.eps },
            q: o.q,
            bandwidth: o.bandwidth,
            init: if o.zero_init != 0 {
                InitMode::Zero
            } else {
                InitMode::Adjoint
            },
        };
        let (x, _) = solver::run(meas, &op, &cfg)?;
        *out = boxed(CassiCube(x));
        Ok(())
    })
}

/// Whole-cube PSNR in dB; `+inf` for identical cubes.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cassi_psnr(
    a: *const CassiCube,
    b: *const CassiCube,
    peak: f64,
    out: *mut f64,
) -> CassiStatus {
    guard(|| {
        let v = metrics::psnr(&borrow(a, "a")?.0, &borrow(b, "b")?.0, peak)?;
        *out_slot(out, "out")? = v;
        Ok(())
    })
}

/// Band-averaged SSIM.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cassi_ssim(
    a: *const CassiCube,
    b: *const CassiCube,
    peak: f64,
    out: *mut f64,
) -> CassiStatus {
    guard(|| {
        let v = metrics::ssim(&borrow(a, "a")?.0, &borrow(b, "b")?.0, peak)?;
        *out_slot(out, "out")? = v;
        Ok(())
    })
}
