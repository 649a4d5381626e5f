//! Element analysis of noisy time series with generalized Morse wavelets.
//!
//! A signal is modelled as a sum of isolated, scaled, shifted and
//! phase-rotated Morse wavelets ("elements") on top of stationary Gaussian
//! noise. Each element leaves a single maximum in the modulus of a Morse
//! wavelet transform; the location and value of that maximum give back the
//! element's time, complex amplitude and scale in closed form.
//!
//! Module map:
//!
//! * [`morse`]: frequency- and time-domain generalized Morse wavelets.
//! * [`cwt`]: continuous wavelet transform (FFT path and direct-summation
//!   path) on a logarithmic scale grid, with edge masking.
//! * [`theory`]: closed forms for the transform of one Morse wavelet by
//!   another and the quantities derived from its maximum.
//! * [`detect`]: maxima detection, noise thresholds, element estimation,
//!   synthesis and element-scalogram reconstruction.
//! * [`preprocess`]: uniform resampling and zero-phase Butterworth high-pass
//!   filtering.
//! * [`io`]: CSV ingestion, configuration and output serialization.
//! * [`pipeline`]: the end-to-end analysis run.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod cwt;
pub mod detect;
mod error;
pub mod io;
pub mod morse;
pub mod par;
pub mod pipeline;
pub mod preprocess;
pub mod proxy;
pub mod special;
pub mod theory;

pub use error::{Error, Result};
pub use num_complex::Complex64;
