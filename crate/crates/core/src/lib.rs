//! Signal-level building blocks for HRRP target recognition under compound
//! noise jamming with a frequency-agile (FA) radar.
//!
//! The crate covers everything up to and including the model-based baseline:
//!
//! - [`numerics`]: power-of-two FFT, seeded random streams, periodogram PSD.
//! - [`scene`]: parametric point-scatterer target classes.
//! - [`radar_sim`]: FA hop schedules and per-pulse echo spectra.
//! - [`jamming`]: multi-jammer received power, rectangular PSDs, noise synthesis
//!   and SJR calibration.
//! - [`hrrp`]: motion compensation, spectrum stitching and range profiles.
//! - [`filters`]: Wiener gains from oracle or estimated PSDs.
//!
//! Numerical kernels are generic over [`Real`] (`f32`/`f64`); the radar
//! simulation itself runs in `f64`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod filters;
pub mod hrrp;
pub mod jamming;
pub mod numerics;
pub mod radar_sim;
pub mod scene;

pub use error::{Error, Result};
pub use numerics::{FftPlan, Prng, Real};

/// Complex sample in the simulation precision.
pub type C64 = num_complex::Complex<f64>;
/// Complex sample in the training precision.
pub type C32 = num_complex::Complex<f32>;
/// Complex vector; `re`/`im` pairs stored interleaved as `Complex<T>`.
pub type ComplexVec<T = f64> = Vec<num_complex::Complex<T>>;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;
