//! Numerical model of a Sagnac-loop polarization encoder driven by a
//! traveling-wave LiNbO3 phase modulator, and of the decoy-state BB84 key
//! rate it supports.
//!
//! The crate is organised bottom-up:
//!
//! * [`polarization`]: Jones/Stokes calculus, BB84 states, PER/QBER/IQBER.
//! * [`modulator`]: forward and counter-propagating modulation response,
//!   including a time-domain integration oracle and a `tau_d` fitter.
//! * [`drive`]: electrical drive waveforms, optical pulse shapes, duty cycle
//!   and the repetition-rate bound of square-wave Sagnac encoders.
//! * [`encoder`]: the composed encoder: pulse ensembles, PER sweeps over duty
//!   cycle and delay, reverse-modulation residual, equivalent half-wave voltage.
//! * [`skr`]: finite-key decoy-state BB84 secure key rate versus distance.
//! * [`config`], [`presets`], [`output`]: the `polmod` command-line front-end.

// `!(a > b)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod drive;
pub mod encoder;
pub mod fixtures;
pub mod modulator;
pub mod output;
pub mod polarization;
pub mod presets;
pub mod quadrature;
pub mod skr;

mod error;

pub use error::{Error, ParamError, Result};

/// PER threshold used to judge low-error modulation, in dB.
pub const PER_THRESHOLD_DB: f64 = 18.24;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
