//! Sagnac-loop encoder: pulse ensembles through the modulator and the PER
//! they produce.
//!
//! The generator amplitude is chosen so that the drive peak yields the
//! requested phase. Each photon of the pulse samples the drive at its own
//! arrival time, so a finite pulse on a sine drive is a mixture of slightly
//! under-rotated states. A baseline error floor (`baseline_per_db`) is mixed
//! in as a fully depolarized component of weight `2·e_b`, which leaves
//! exactly `e_b` of error when the drive is ideal.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drive::{drive_fwhm, drive_voltage, DriveWaveform, PulseProfile, PulseShape};
use crate::modulator::{forward_phase, worst_reverse_phase, ModulatorError, ModulatorParams};
use crate::polarization::{
    error_from_per, jones_from_phase, per_from_error, projection_error, JonesVector, MixedState,
    PolarizationError,
};
use crate::ParamError;

/// Number of Simpson intervals used to sample a pulse over its truncation
/// window. A multiple of 12 so that `±FWHM/2` falls on a sample.
pub const PULSE_INTERVALS: usize = 1200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncoderError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Polarization(#[from] PolarizationError),
    #[error(transparent)]
    Modulator(#[from] ModulatorError),
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("sweep grid must be strictly increasing (at index {0})")]
    GridNotIncreasing(usize),
    #[error("phase list is empty")]
    NoPhases,
    #[error("calibrated rf_transfer_efficiency {0} is outside (0, 1]")]
    Calibration(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub modulator: ModulatorParams,
    pub drive: DriveWaveform,
    /// `None` is an ideal zero-width pulse.
    pub pulse: Option<PulseShape>,
    pub baseline_per_db: f64,
    /// Fraction of generator voltage reaching the electrode.
    pub rf_transfer_efficiency: f64,
    /// Add the worst-case counter-propagating phase to every photon.
    #[serde(default)]
    pub include_reverse_residual: bool,
}

impl Default for EncoderConfig {
    /// 10 GHz sine drive, 2.16 ps Gaussian pulses, 30 dB system floor.
    fn default() -> Self {
        EncoderConfig {
            modulator: ModulatorParams::default(),
            drive: DriveWaveform::sine(0.0, 10e9),
            pulse: Some(PulseShape {
                fwhm_t0: 2.16e-12,
                rep_rate: 10e9,
                profile: PulseProfile::Gaussian,
            }),
            baseline_per_db: 30.0,
            rf_transfer_efficiency: 1.0,
            include_reverse_residual: false,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), ParamError> {
        self.modulator
            .validate()
            .map_err(|e| e.within("modulator"))?;
        self.drive.validate().map_err(|e| e.within("drive"))?;
        if let Some(p) = &self.pulse {
            p.validate().map_err(|e| e.within("pulse"))?;
        }
        if !(self.baseline_per_db.is_finite() && self.baseline_per_db > 0.0) {
            return Err(ParamError::new("baseline_per_db", "must be finite and > 0"));
        }
        if !(self.rf_transfer_efficiency > 0.0 && self.rf_transfer_efficiency <= 1.0) {
            return Err(ParamError::new(
                "rf_transfer_efficiency",
                "must lie in (0, 1]",
            ));
        }
        Ok(())
    }

    /// Same configuration with the pulse width set to give duty cycle `duty`
    /// against the configured drive; zero gives a delta pulse.
    pub fn with_duty(&self, duty: f64) -> Result<Self, ParamError> {
        if !(duty.is_finite() && duty >= 0.0) {
            return Err(ParamError::new("duty", "must be finite and >= 0"));
        }
        let mut cfg = *self;
        cfg.pulse = if duty == 0.0 {
            None
        } else {
            let (rep_rate, profile) = self
                .pulse
                .map(|p| (p.rep_rate, p.profile))
                .unwrap_or((self.drive.frequency_fd, PulseProfile::Gaussian));
            Some(
                PulseShape::new(duty * drive_fwhm(&self.drive), rep_rate, profile)
                    .map_err(|e| e.within("pulse"))?,
            )
        };
        Ok(cfg)
    }

    /// Generator amplitude for which the drive peak produces `phase` on
    /// co-propagating light.
    pub fn amplitude_for_phase(&self, phase: f64) -> f64 {
        phase.abs() * self.modulator.v_pi_f / (PI * self.rf_transfer_efficiency)
    }
}

/// One photon class in the pulse ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleMember {
    /// Offset from the pulse centre, s.
    pub time: f64,
    pub weight: f64,
    /// Signed generator voltage seen by this photon.
    pub drive_v: f64,
    /// Relative D/A phase after the modulator.
    pub phase: f64,
}

/// Sample times and normalized Simpson weights across the pulse window.
fn pulse_samples(pulse: Option<&PulseShape>) -> Vec<(f64, f64)> {
    let Some(p) = pulse else {
        return vec![(0.0, 1.0)];
    };
    let half = p.truncation();
    let n = PULSE_INTERVALS;
    let h = 2.0 * half / n as f64;
    let mut samples: Vec<(f64, f64)> = (0..=n)
        .map(|k| {
            let t = -half + k as f64 * h;
            let c = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (t, c * crate::drive::pulse_weight(p, t))
        })
        .collect();
    let total: f64 = samples.iter().map(|s| s.1).sum();
    for s in &mut samples {
        s.1 /= total;
    }
    samples
}

/// Builds the photon ensemble for a target phase with the pulse centre
/// displaced by `delay` from the drive peak.
pub fn ensemble(
    cfg: &EncoderConfig,
    target_phase: f64,
    delay: f64,
) -> Result<Vec<EnsembleMember>, EncoderError> {
    cfg.validate()?;
    if !target_phase.is_finite() {
        return Err(PolarizationError::NonFinitePhase(target_phase).into());
    }
    let drive = cfg
        .drive
        .with_amplitude(cfg.amplitude_for_phase(target_phase));
    let sign = if target_phase < 0.0 { -1.0 } else { 1.0 };
    let t_peak = drive.peak_time();
    let reverse = if cfg.include_reverse_residual && target_phase != 0.0 {
        reverse_residual_for(&drive, cfg)?
    } else {
        0.0
    };
    Ok(pulse_samples(cfg.pulse.as_ref())
        .into_iter()
        .map(|(t, weight)| {
            let drive_v = sign * drive_voltage(&drive, t_peak + t - delay);
            let phase = forward_phase(drive_v * cfg.rf_transfer_efficiency, &cfg.modulator)
                - sign * reverse;
            EnsembleMember {
                time: t,
                weight,
                drive_v,
                phase,
            }
        })
        .collect())
}

/// Mixed output state, including the depolarized baseline floor.
pub fn output_state(
    cfg: &EncoderConfig,
    target_phase: f64,
    delay: f64,
) -> Result<MixedState, EncoderError> {
    let members = ensemble(cfg, target_phase, delay)?;
    let pure = members
        .iter()
        .map(|m| Ok((jones_from_phase(m.phase)?, m.weight)))
        .collect::<Result<Vec<_>, PolarizationError>>()?;
    let total: f64 = pure.iter().map(|p| p.1).sum();
    let pure = pure.into_iter().map(|(j, w)| (j, w / total)).collect();
    let floor = error_from_per(cfg.baseline_per_db)?;
    let ideal = ideal_state(target_phase)?;
    Ok(MixedState::new(pure)?.depolarize(2.0 * floor, &ideal)?)
}

pub fn ideal_state(target_phase: f64) -> Result<JonesVector, PolarizationError> {
    jones_from_phase(target_phase)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerPoint {
    pub per_db: f64,
    /// `error_from_per(per_db)`, so PER and QBER never disagree.
    pub qber: f64,
}

pub fn per_of_state(
    cfg: &EncoderConfig,
    target_phase: f64,
    delay: f64,
) -> Result<PerPoint, EncoderError> {
    let state = output_state(cfg, target_phase, delay)?;
    let e = projection_error(&state, &ideal_state(target_phase)?)?;
    let per_db = per_from_error(e)?;
    Ok(PerPoint {
        per_db,
        qber: error_from_per(per_db)?,
    })
}

/// The three modulated BB84 settings: `V_πF/2`, `V_πF`, `3V_πF/2`.
pub fn default_phases() -> Vec<f64> {
    vec![PI / 2.0, PI, 1.5 * PI]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Duty,
    Delay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub abscissa: f64,
    pub phase_rad: f64,
    pub per_db: f64,
    pub qber: f64,
}

/// PER over a grid of duty cycles or delays, one row per (abscissa, phase)
/// in grid-major order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub phases: Vec<f64>,
    pub rows: Vec<SweepRow>,
    pub config: EncoderConfig,
}

fn check_grid(grid: &[f64], phases: &[f64]) -> Result<(), EncoderError> {
    if grid.is_empty() {
        return Err(EncoderError::EmptyGrid);
    }
    if phases.is_empty() {
        return Err(EncoderError::NoPhases);
    }
    if let Some(i) = grid.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(EncoderError::GridNotIncreasing(i + 1));
    }
    Ok(())
}

fn run_sweep<F>(
    cfg: &EncoderConfig,
    kind: SweepKind,
    grid: &[f64],
    phases: &[f64],
    eval: F,
) -> Result<SweepResult, EncoderError>
where
    F: Fn(f64, f64) -> Result<PerPoint, EncoderError> + Sync,
{
    check_grid(grid, phases)?;
    cfg.validate()?;
    let jobs: Vec<(f64, f64)> = grid
        .iter()
        .flat_map(|&x| phases.iter().map(move |&p| (x, p)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(x, phase)| {
            eval(x, phase).map(|pt| SweepRow {
                abscissa: x,
                phase_rad: phase,
                per_db: pt.per_db,
                qber: pt.qber,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepResult {
        kind,
        phases: phases.to_vec(),
        rows,
        config: *cfg,
    })
}

/// PER versus duty cycle at zero delay.
pub fn sweep_duty(
    cfg: &EncoderConfig,
    duty_grid: &[f64],
    phases: &[f64],
) -> Result<SweepResult, EncoderError> {
    run_sweep(cfg, SweepKind::Duty, duty_grid, phases, |d, phase| {
        per_of_state(&cfg.with_duty(d)?, phase, 0.0)
    })
}

/// PER versus pulse-to-drive delay (seconds) at the configured pulse width.
pub fn sweep_delay(
    cfg: &EncoderConfig,
    delay_grid: &[f64],
    phases: &[f64],
) -> Result<SweepResult, EncoderError> {
    run_sweep(cfg, SweepKind::Delay, delay_grid, phases, |delay, phase| {
        per_of_state(cfg, phase, delay)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorstPoint {
    pub abscissa: f64,
    pub per_db: f64,
    pub phase_rad: f64,
}

impl SweepResult {
    /// Pointwise minimum PER over phases. Ties go to the earlier phase in
    /// the configured list.
    pub fn worst_curve(&self) -> Vec<WorstPoint> {
        let n = self.phases.len();
        self.rows
            .chunks(n)
            .map(|chunk| {
                let w = chunk.iter().fold(
                    chunk[0],
                    |acc, r| if r.per_db < acc.per_db { *r } else { acc },
                );
                WorstPoint {
                    abscissa: w.abscissa,
                    per_db: w.per_db,
                    phase_rad: w.phase_rad,
                }
            })
            .collect()
    }

    /// PER curve of one phase.
    pub fn curve(&self, phase: f64) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.phase_rad == phase)
            .map(|r| (r.abscissa, r.per_db))
            .collect()
    }
}

/// First abscissa `≥ from` where a curve falls below `threshold`, linearly
/// interpolated between grid points.
pub fn threshold_crossing(curve: &[(f64, f64)], threshold: f64, from: f64) -> Option<f64> {
    let pts: Vec<_> = curve.iter().copied().filter(|p| p.0 >= from).collect();
    if pts.first().is_some_and(|p| p.1 < threshold) {
        return Some(pts[0].0);
    }
    pts.windows(2)
        .find(|w| w[0].1 >= threshold && w[1].1 < threshold)
        .map(|w| {
            let (x0, y0) = w[0];
            let (x1, y1) = w[1];
            x0 + (threshold - y0) * (x1 - x0) / (y1 - y0)
        })
}

fn reverse_residual_for(drive: &DriveWaveform, cfg: &EncoderConfig) -> Result<f64, EncoderError> {
    let at_electrode = drive.with_amplitude(drive.amplitude_v0 * cfg.rf_transfer_efficiency);
    Ok(worst_reverse_phase(&at_electrode, &cfg.modulator)?.0)
}

/// Worst-case phase (over entry time) imparted on counter-propagating light
/// by the configured drive.
pub fn reverse_residual(cfg: &EncoderConfig) -> Result<f64, EncoderError> {
    cfg.validate()?;
    reverse_residual_for(&cfg.drive, cfg)
}

/// Mean of `V(t)/V₀` over the pulse at zero delay.
pub fn pulse_averaged_drive_factor(cfg: &EncoderConfig) -> Result<f64, EncoderError> {
    cfg.validate()?;
    let drive = cfg.drive.with_amplitude(1.0);
    let t_peak = drive.peak_time();
    Ok(pulse_samples(cfg.pulse.as_ref())
        .into_iter()
        .map(|(t, w)| w * drive_voltage(&drive, t_peak + t))
        .sum())
}

/// Generator amplitude at which the pulse-averaged phase reaches `π`.
pub fn equivalent_v_pi(cfg: &EncoderConfig) -> Result<f64, EncoderError> {
    let factor = pulse_averaged_drive_factor(cfg)?;
    Ok(cfg.modulator.v_pi_f / (cfg.rf_transfer_efficiency * factor))
}

/// RF efficiency that makes [`equivalent_v_pi`] equal `target_v`. This is a
/// calibration against a measured value, not a prediction.
pub fn calibrate_rf_efficiency(cfg: &EncoderConfig, target_v: f64) -> Result<f64, EncoderError> {
    let mut unit = *cfg;
    unit.rf_transfer_efficiency = 1.0;
    let factor = pulse_averaged_drive_factor(&unit)?;
    let eff = cfg.modulator.v_pi_f / (target_v * factor);
    if !(eff > 0.0 && eff <= 1.0) {
        return Err(EncoderError::Calibration(eff));
    }
    Ok(eff)
}

/// Closed-form drive sag at `±FWHM/2` for a sine drive, as a fraction of
/// the peak: `1 − cos(π d / 3)`.
pub fn half_fwhm_drive_reduction(duty: f64) -> f64 {
    1.0 - (PI * duty / 3.0).cos()
}
