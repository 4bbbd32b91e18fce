//! Electrical drive waveforms and optical pulse shapes.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{ParamError, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DriveError {
    #[error("f_max undefined: pulse width, drive duration and optical transit are all zero")]
    ZeroTransit,
    #[error("f_max inputs must be finite and nonnegative")]
    NegativeInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriveKind {
    Sine,
    Square,
}

/// Voltage applied to the modulator electrode.
///
/// For a sine drive `V(t) = V₀·sin(2π f t + phase_offset)`. For a square
/// drive the voltage is `V₀` on `[delay + kT, delay + kT + T_e)` and zero
/// elsewhere, with `T = 1/f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveWaveform {
    pub kind: DriveKind,
    pub amplitude_v0: f64,
    pub frequency_fd: f64,
    #[serde(default)]
    pub phase_offset: f64,
    #[serde(default)]
    pub delay: f64,
    #[serde(default)]
    pub square_duration_te: f64,
}

impl DriveWaveform {
    pub fn sine(amplitude_v0: f64, frequency_fd: f64) -> Self {
        DriveWaveform {
            kind: DriveKind::Sine,
            amplitude_v0,
            frequency_fd,
            phase_offset: 0.0,
            delay: 0.0,
            square_duration_te: 0.0,
        }
    }

    pub fn square(amplitude_v0: f64, frequency_fd: f64, duration_te: f64) -> Self {
        DriveWaveform {
            kind: DriveKind::Square,
            amplitude_v0,
            frequency_fd,
            phase_offset: 0.0,
            delay: 0.0,
            square_duration_te: duration_te,
        }
    }

    pub fn with_amplitude(mut self, amplitude_v0: f64) -> Self {
        self.amplitude_v0 = amplitude_v0;
        self
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency_fd
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.amplitude_v0.is_finite() && self.amplitude_v0 >= 0.0) {
            return Err(ParamError::new("amplitude_v0", "must be finite and >= 0"));
        }
        if !(self.frequency_fd.is_finite() && self.frequency_fd > 0.0) {
            return Err(ParamError::new("frequency_fd", "must be finite and > 0"));
        }
        if !self.phase_offset.is_finite() {
            return Err(ParamError::new("phase_offset", "must be finite"));
        }
        if !self.delay.is_finite() {
            return Err(ParamError::new("delay", "must be finite"));
        }
        if self.kind == DriveKind::Square {
            let te = self.square_duration_te;
            if !(te.is_finite() && te > 0.0 && te < self.period()) {
                return Err(ParamError::new(
                    "square_duration_te",
                    "must satisfy 0 < T_e < 1/frequency_fd for a square drive",
                ));
            }
        }
        Ok(())
    }

    /// A time at which the drive reaches its peak (centre of the flat top for
    /// square drives).
    pub fn peak_time(&self) -> f64 {
        match self.kind {
            DriveKind::Sine => (PI / 2.0 - self.phase_offset) / (TAU * self.frequency_fd),
            DriveKind::Square => self.delay + 0.5 * self.square_duration_te,
        }
    }

    /// Times in `(a, b)` where the drive is discontinuous.
    pub fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        if self.kind != DriveKind::Square {
            return Vec::new();
        }
        let period = self.period();
        let mut out = Vec::new();
        let mut k = ((a - self.delay) / period).floor() - 1.0;
        loop {
            let start = self.delay + k * period;
            if start > b {
                break;
            }
            for edge in [start, start + self.square_duration_te] {
                if edge > a && edge < b {
                    out.push(edge);
                }
            }
            k += 1.0;
        }
        out
    }
}

pub fn drive_voltage(w: &DriveWaveform, t: f64) -> f64 {
    match w.kind {
        DriveKind::Sine => w.amplitude_v0 * (TAU * w.frequency_fd * t + w.phase_offset).sin(),
        DriveKind::Square => {
            let period = w.period();
            let local = (t - w.delay).rem_euclid(period);
            if local < w.square_duration_te {
                w.amplitude_v0
            } else {
                0.0
            }
        }
    }
}

/// Full width at half maximum of the drive's active lobe.
///
/// A sine lies above half its peak on `(π/6, 5π/6)` of each cycle, i.e. one
/// third of the period; a square drive is flat for `T_e`.
pub fn drive_fwhm(w: &DriveWaveform) -> f64 {
    match w.kind {
        DriveKind::Sine => w.period() / 3.0,
        DriveKind::Square => w.square_duration_te,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseProfile {
    Gaussian,
    Sech2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseShape {
    pub fwhm_t0: f64,
    pub rep_rate: f64,
    #[serde(default = "default_profile")]
    pub profile: PulseProfile,
}

fn default_profile() -> PulseProfile {
    PulseProfile::Gaussian
}

/// Ensemble window half-width in units of the pulse FWHM.
pub const PULSE_TRUNCATION_FWHM: f64 = 3.0;

// FWHM = 2·sqrt(2 ln 2)·σ for a Gaussian and 2·ln(1+√2)·τ for sech².
const GAUSS_FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;
const SECH2_FWHM_PER_TAU: f64 = 1.762_747_174_039_086;

impl PulseShape {
    pub fn new(fwhm_t0: f64, rep_rate: f64, profile: PulseProfile) -> Result<Self, ParamError> {
        let p = PulseShape {
            fwhm_t0,
            rep_rate,
            profile,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn gaussian(fwhm_t0: f64, rep_rate: f64) -> Result<Self, ParamError> {
        Self::new(fwhm_t0, rep_rate, PulseProfile::Gaussian)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.rep_rate.is_finite() && self.rep_rate > 0.0) {
            return Err(ParamError::new("rep_rate", "must be finite and > 0"));
        }
        if !(self.fwhm_t0.is_finite() && self.fwhm_t0 > 0.0) {
            return Err(ParamError::new("fwhm_t0", "must be finite and > 0"));
        }
        if self.fwhm_t0 >= 1.0 / self.rep_rate {
            return Err(ParamError::new(
                "fwhm_t0",
                "must be shorter than the pulse period 1/rep_rate",
            ));
        }
        Ok(())
    }

    /// Half-width of the window used when sampling the pulse into an ensemble.
    pub fn truncation(&self) -> f64 {
        PULSE_TRUNCATION_FWHM * self.fwhm_t0
    }
}

/// Normalized intensity of a single pulse centred at `t = 0`, in 1/s.
pub fn pulse_weight(p: &PulseShape, t: f64) -> f64 {
    match p.profile {
        PulseProfile::Gaussian => {
            let sigma = p.fwhm_t0 / GAUSS_FWHM_PER_SIGMA;
            (-0.5 * (t / sigma).powi(2)).exp() / (sigma * TAU.sqrt())
        }
        PulseProfile::Sech2 => {
            let tau = p.fwhm_t0 / SECH2_FWHM_PER_TAU;
            let s = 1.0 / (t / tau).cosh();
            s * s / (2.0 * tau)
        }
    }
}

/// Ratio of optical-pulse FWHM to drive FWHM.
pub fn duty_cycle(p: &PulseShape, w: &DriveWaveform) -> f64 {
    p.fwhm_t0 / drive_fwhm(w)
}

/// Highest repetition rate of a square-wave Sagnac encoder that keeps the
/// electrical pulse away from counter-propagating light:
/// `1 / [(T₀ + T_e) + 2 n₀ L / c]`.
pub fn f_max_previous_scheme(t0: f64, te: f64, l: f64, n0: f64) -> Result<f64, DriveError> {
    if [t0, te, l, n0]
        .iter()
        .any(|x| !(x.is_finite() && *x >= 0.0))
    {
        return Err(DriveError::NegativeInput);
    }
    let denom = (t0 + te) + 2.0 * n0 * l / SPEED_OF_LIGHT;
    if denom <= 0.0 {
        return Err(DriveError::ZeroTransit);
    }
    Ok(1.0 / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, QuadOptions};
    use approx::assert_relative_eq;

    #[test]
    fn sine_values() {
        let w = DriveWaveform::sine(3.0, 10e9);
        assert_eq!(drive_voltage(&w, 0.0), 0.0);
        assert_relative_eq!(drive_voltage(&w, 25e-12), 3.0, max_relative = 1e-12);
        assert_relative_eq!(drive_voltage(&w, w.peak_time()), 3.0, max_relative = 1e-12);
    }

    #[test]
    fn square_values() {
        let mut w = DriveWaveform::square(2.0, 1e9, 200e-12);
        w.delay = 100e-12;
        assert_eq!(drive_voltage(&w, 150e-12), 2.0);
        assert_eq!(drive_voltage(&w, 50e-12), 0.0);
        assert_eq!(drive_voltage(&w, 350e-12), 0.0);
        assert_eq!(drive_voltage(&w, 1.15e-9), 2.0);
        assert_eq!(w.peak_time(), 200e-12);
        let bp = w.breakpoints(0.0, 1.2e-9);
        assert_eq!(bp.len(), 3);
        for (got, want) in bp.iter().zip([100e-12, 300e-12, 1.1e-9]) {
            assert_relative_eq!(*got, want, max_relative = 1e-12);
        }
    }

    #[test]
    fn square_duration_must_fit_period() {
        let w = DriveWaveform::square(1.0, 10e9, 200e-12);
        assert_eq!(w.validate().unwrap_err().field, "square_duration_te");
    }

    #[test]
    fn gaussian_half_maximum() {
        let p = PulseShape::gaussian(2.16e-12, 10e9).unwrap();
        let peak = pulse_weight(&p, 0.0);
        assert!(peak > pulse_weight(&p, 1e-13));
        assert_relative_eq!(pulse_weight(&p, 1.08e-12) / peak, 0.5, max_relative = 1e-12);
        assert_relative_eq!(
            pulse_weight(&p, -1.08e-12) / peak,
            0.5,
            max_relative = 1e-12
        );
    }

    #[test]
    fn sech2_half_maximum() {
        let p = PulseShape::new(2.0e-12, 10e9, PulseProfile::Sech2).unwrap();
        let peak = pulse_weight(&p, 0.0);
        assert_relative_eq!(pulse_weight(&p, 1.0e-12) / peak, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn pulse_integrates_to_one() {
        for profile in [PulseProfile::Gaussian, PulseProfile::Sech2] {
            for fwhm in [1e-13, 2.16e-12, 11.27e-12, 30e-12] {
                let rep = f64::min(10e9, 0.05 / fwhm);
                let p = PulseShape::new(fwhm, rep, profile).unwrap();
                let opts = QuadOptions {
                    abs_tol: 1e-12,
                    ..Default::default()
                };
                // Integrate in units of FWHM to keep the tolerance meaningful.
                let r = integrate(|u| fwhm * pulse_weight(&p, u * fwhm), -5.0, 5.0, opts).unwrap();
                let tol = if profile == PulseProfile::Gaussian {
                    1e-6
                } else {
                    1e-4
                };
                assert!(
                    (r.value - 1.0).abs() < tol,
                    "{profile:?} {fwhm}: {}",
                    r.value
                );
                // Over a full period the tails close the gap.
                let half = 0.5 / p.rep_rate / fwhm;
                let r =
                    integrate(|u| fwhm * pulse_weight(&p, u * fwhm), -half, half, opts).unwrap();
                assert!(
                    (r.value - 1.0).abs() < 1e-9,
                    "{profile:?} {fwhm}: {}",
                    r.value
                );
            }
        }
    }

    #[test]
    fn pulse_validation() {
        assert_eq!(
            PulseShape::gaussian(-1e-12, 10e9).unwrap_err().field,
            "fwhm_t0"
        );
        assert_eq!(
            PulseShape::gaussian(200e-12, 10e9).unwrap_err().field,
            "fwhm_t0"
        );
    }

    /// Root-finding oracle: the half-maximum crossings of a unit sine over
    /// its first positive lobe.
    fn sine_fwhm_by_bisection(f: f64) -> f64 {
        let period = 1.0 / f;
        let g = |t: f64| (TAU * f * t).sin() - 0.5;
        let bisect = |mut lo: f64, mut hi: f64| {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if (g(lo) < 0.0) == (g(mid) < 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        bisect(period / 4.0, period / 2.0) - bisect(0.0, period / 4.0)
    }

    #[test]
    fn drive_fwhm_examples() {
        let w = DriveWaveform::sine(1.0, 10e9);
        assert_relative_eq!(
            drive_fwhm(&w),
            sine_fwhm_by_bisection(10e9),
            max_relative = 1e-12
        );
        assert_relative_eq!(drive_fwhm(&w), 33.333_333e-12, max_relative = 1e-6);
        let w = DriveWaveform::sine(1.0, 2.5e9);
        assert_relative_eq!(
            drive_fwhm(&w),
            sine_fwhm_by_bisection(2.5e9),
            max_relative = 1e-12
        );
        assert_relative_eq!(drive_fwhm(&w), 133.333_333e-12, max_relative = 1e-6);
        let w = DriveWaveform::square(1.0, 1e9, 200e-12);
        assert_eq!(drive_fwhm(&w), 200e-12);
    }

    #[test]
    fn duty_cycle_examples() {
        let w = DriveWaveform::sine(1.0, 10e9);
        let p = PulseShape::gaussian(2.16e-12, 10e9).unwrap();
        assert_relative_eq!(duty_cycle(&p, &w), 0.0648, max_relative = 1e-12);
        let p = PulseShape::gaussian(0.338 * 100e-12 / 3.0, 10e9).unwrap();
        assert_relative_eq!(duty_cycle(&p, &w), 0.338, max_relative = 1e-12);
        assert_relative_eq!(p.fwhm_t0, 11.267e-12, max_relative = 1e-4);
        let tiny = PulseShape::gaussian(1e-18, 10e9).unwrap();
        assert!(duty_cycle(&tiny, &w) < 1e-7);
    }

    #[test]
    fn duty_cycle_scaling() {
        let p = PulseShape::gaussian(3e-12, 1e9).unwrap();
        let p2 = PulseShape::gaussian(6e-12, 1e9).unwrap();
        let w = DriveWaveform::sine(1.0, 5e9);
        let w2 = DriveWaveform::sine(1.0, 10e9);
        assert_relative_eq!(
            duty_cycle(&p2, &w),
            2.0 * duty_cycle(&p, &w),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            duty_cycle(&p, &w2),
            2.0 * duty_cycle(&p, &w),
            max_relative = 1e-12
        );
    }

    #[test]
    fn f_max_examples() {
        // 1 / (2 · 2.2 · 0.03 / c)
        let f = f_max_previous_scheme(0.0, 0.0, 0.03, 2.2).unwrap();
        let oracle = SPEED_OF_LIGHT / (2.0 * 2.2 * 0.03);
        assert_relative_eq!(f, oracle, max_relative = 1e-12);
        assert!((f / 2.27e9 - 1.0).abs() < 0.05);
        assert_relative_eq!(
            f_max_previous_scheme(100e-12, 0.0, 0.0, 2.2).unwrap(),
            10e9,
            max_relative = 1e-12
        );
        let f2 = f_max_previous_scheme(0.0, 0.0, 0.06, 2.2).unwrap();
        assert_relative_eq!(f2, f / 2.0, max_relative = 1e-12);
        assert_eq!(
            f_max_previous_scheme(0.0, 0.0, 0.0, 2.2),
            Err(DriveError::ZeroTransit)
        );
        assert_eq!(
            f_max_previous_scheme(-1.0, 0.0, 0.0, 2.2),
            Err(DriveError::NegativeInput)
        );
    }

    #[test]
    fn f_max_is_decreasing() {
        let base = f_max_previous_scheme(10e-12, 100e-12, 0.02, 2.2).unwrap();
        assert!(f_max_previous_scheme(20e-12, 100e-12, 0.02, 2.2).unwrap() < base);
        assert!(f_max_previous_scheme(10e-12, 200e-12, 0.02, 2.2).unwrap() < base);
        assert!(f_max_previous_scheme(10e-12, 100e-12, 0.03, 2.2).unwrap() < base);
    }
}
