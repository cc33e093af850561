//! Coded-aperture snapshot spectral imaging: forward simulation and
//! reconstruction of hyperspectral cubes from a single 2D measurement.
//!
//! The reconstruction is MAP estimation under a Gaussian scale mixture
//! prior. Every pixel is modelled as a Gaussian around a local mean
//! computed with spatially-variant separable filters; its variance comes
//! from a closed-form scale-prior update. Gradient steps on the data term
//! and the weighted quadratic prior alternate with filter/weight refreshes.
//!
//! Modules, bottom up:
//! - [`cube`], [`io`], [`scene`]: data types, `HSC1`/`MSK1`/`MEA1` files, synthetic scenes
//! - [`operator`], [`noise`]: the measurement operator, its adjoint, noise
//! - [`prior`], [`filters`]: weight update and local means
//! - [`solver`]: the iterative reconstruction and a TV baseline
//! - [`metrics`]: PSNR and SSIM
//! - [`tune`]: hyperparameter coordinate search
//! - [`export`]: PNG band export

pub mod cube;
pub mod error;
pub mod export;
pub mod filters;
pub mod io;
pub mod metrics;
pub mod noise;
pub mod operator;
pub mod prior;
pub mod scene;
pub mod solver;
pub mod tune;

pub use cube::{Dims, HsiCube, Mask2D, Measurement};
pub use error::{Error, ErrorKind, FormatError, Result};
pub use operator::ForwardOperator;
pub use prior::ScalePrior;
pub use solver::{InitMode, SolverConfig, SolverTrace, StepRule};
