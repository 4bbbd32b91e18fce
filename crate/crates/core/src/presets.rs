//! Figure-reproduction presets. Each preset turns a [`RunConfig`] into one
//! or more [`Artifact`]s; writing them is left to [`crate::output`].

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::RunConfig;
use crate::drive::{drive_fwhm, duty_cycle, PULSE_TRUNCATION_FWHM};
use crate::encoder::{
    calibrate_rf_efficiency, equivalent_v_pi, reverse_residual, sweep_delay, sweep_duty,
    threshold_crossing, EncoderError, SweepResult, PULSE_INTERVALS,
};
use crate::fixtures::{check_iqber_golden, iqber_golden};
use crate::modulator::{
    fit_tau_d, read_measurements, v_pi_forward_at, v_pi_reverse, FitOptions, ModulatorError,
    ModulatorParams, ReverseVpi, DIVERGENCE_GUARD,
};
use crate::output::{Artifact, Cell};
use crate::polarization::{error_from_per, PolarizationError};
use crate::skr::{cutoff_distance, rate_curve, SkrError, BOUND_DESCRIPTION};
use crate::PER_THRESHOLD_DB;

/// Measured equivalent half-wave voltage at 10 GHz, used only as a
/// calibration target for the RF transfer efficiency.
pub const MEASURED_EQUIVALENT_V_PI: f64 = 5.47;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig4Vpi,
    Fig10Duty,
    Fig11Delay,
    Fig12Skr,
    GoldenIqber,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Fig4Vpi,
        Preset::Fig10Duty,
        Preset::Fig11Delay,
        Preset::Fig12Skr,
        Preset::GoldenIqber,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig4Vpi => "fig4-vpi",
            Preset::Fig10Duty => "fig10-duty",
            Preset::Fig11Delay => "fig11-delay",
            Preset::Fig12Skr => "fig12-skr",
            Preset::GoldenIqber => "golden-iqber",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown preset `{0}` (expected one of: fig4-vpi, fig10-duty, fig11-delay, fig12-skr, golden-iqber)")]
pub struct UnknownPreset(pub String);

impl FromStr for Preset {
    type Err = UnknownPreset;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| UnknownPreset(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum PresetError {
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Modulator(#[from] ModulatorError),
    #[error(transparent)]
    Skr(#[from] SkrError),
    #[error(transparent)]
    Polarization(#[from] PolarizationError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// The configuration as recorded in outputs: the output location is not a
/// model input and is left out so that relocating a run keeps its hash.
pub fn provenance(cfg: &RunConfig, preset: Preset) -> Value {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    let obj = v.as_object_mut().expect("config is an object");
    obj.remove("output");
    obj.insert("preset".into(), json!(preset.name()));
    v
}

pub fn run_preset(preset: Preset, cfg: &RunConfig) -> Result<Vec<Artifact>, PresetError> {
    match preset {
        Preset::Fig4Vpi => fig4_vpi(cfg),
        Preset::Fig10Duty => fig10_duty(cfg),
        Preset::Fig11Delay => fig11_delay(cfg),
        Preset::Fig12Skr => fig12_skr(cfg),
        Preset::GoldenIqber => golden_iqber(),
    }
}

fn v_pi_cell(r: ReverseVpi) -> (Cell, Cell) {
    match r {
        ReverseVpi::Finite(v) => (v.into(), false.into()),
        ReverseVpi::Divergent => (f64::INFINITY.into(), true.into()),
    }
}

fn fig4_vpi(cfg: &RunConfig) -> Result<Vec<Artifact>, PresetError> {
    let (params, fit_meta): (ModulatorParams, Value) = match &cfg.vpi_measurements {
        None => (
            cfg.modulator,
            json!({"tau_d_source": "modulator.tau_d (default: first-lobe solution of V_piR/V_piF = 2 at 1.1 GHz)"}),
        ),
        Some(path) => {
            let bytes = fs::read(path).map_err(|source| PresetError::Io {
                path: path.clone(),
                source,
            })?;
            let data = read_measurements(bytes.as_slice())?;
            let report = fit_tau_d(&data, &cfg.modulator, FitOptions::default())?;
            (
                report.params,
                json!({
                    "tau_d_source": "least-squares fit (relative residuals)",
                    "measurements_sha256": hex::encode(Sha256::digest(&bytes)),
                    "fit": report,
                }),
            )
        }
    };
    let freqs = cfg.frequency_grid.values();
    let mut rows = Vec::with_capacity(freqs.len());
    let at_f = |f: f64| ModulatorParams {
        v_pi_f: v_pi_forward_at(f, &params, &cfg.v_pi_f_overrides),
        ..params
    };
    for &f in &freqs {
        let p = at_f(f);
        let (rev, div) = v_pi_cell(v_pi_reverse(f, &p)?);
        rows.push(vec![f.into(), p.v_pi_f.into(), rev, div]);
    }
    let f_max = freqs.last().copied().unwrap_or(0.0);
    let divergences: Vec<f64> = (1..)
        .map(|n| n as f64 / (2.0 * params.tau_d))
        .take_while(|f| *f <= f_max)
        .collect();
    let at = |f: f64| v_pi_reverse(f, &at_f(f)).map(ReverseVpi::finite);

    let mut enc = cfg.encoder();
    enc.modulator = params;
    let calibrated = calibrate_rf_efficiency(&enc, MEASURED_EQUIVALENT_V_PI).ok();
    let mut one_rad = enc;
    one_rad.rf_transfer_efficiency = 1.0;
    one_rad.drive = one_rad
        .drive
        .with_amplitude(one_rad.amplitude_for_phase(1.0));
    let residual = if one_rad.drive.kind == crate::drive::DriveKind::Sine {
        Some(reverse_residual(&one_rad)?)
    } else {
        None
    };

    Ok(vec![Artifact {
        name: "fig4-vpi".into(),
        columns: cols(&[
            "frequency_hz",
            "v_pi_forward_v",
            "v_pi_reverse_v",
            "divergent",
        ]),
        rows,
        metadata: json!({
            "preset": "fig4-vpi",
            "model": "V_piR(f) = V_piF(f) |x / sin x|, x = 2 pi f tau_d",
            "v_pi_f_overrides": cfg.v_pi_f_overrides,
            "v_pi_f_source": if cfg.v_pi_f_overrides.is_empty() { "modulator.v_pi_f at all frequencies" } else { "v_pi_f_overrides, linear, flat beyond the table" },
            "modulator": params,
            "divergence_guard_abs_sin": DIVERGENCE_GUARD,
            "divergent_rows": "v_pi_reverse_v = inf, divergent = 1",
            "divergence_frequencies_hz": divergences,
            "v_pi_reverse_at_1.1GHz_v": at(1.1e9)?,
            "v_pi_reverse_at_10GHz_v": at(10e9)?,
            "reverse_residual_rad_at_drive_frequency_for_1rad_forward": residual,
            "equivalent_v_pi_v": equivalent_v_pi(&enc)?,
            "rf_transfer_efficiency_calibrated_to_5.47V": calibrated,
            "calibration_note": "rf_transfer_efficiency for 5.47 V is a calibration against a measured value, not a prediction",
            "tau": fit_meta,
        }),
    }])
}

fn cols(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn sweep_artifact(name: &str, sweep: &SweepResult, extra: Value) -> Artifact {
    let rows = sweep
        .rows
        .iter()
        .map(|r| {
            vec![
                r.abscissa.into(),
                r.phase_rad.into(),
                r.per_db.into(),
                r.qber.into(),
            ]
        })
        .collect();
    let mut metadata = json!({
        "preset": name,
        "threshold_per_db": PER_THRESHOLD_DB,
        "threshold_qber": error_from_per(PER_THRESHOLD_DB).ok(),
        "phases_rad": sweep.phases,
        "pulse_truncation": format!("+/-{PULSE_TRUNCATION_FWHM} FWHM, {PULSE_INTERVALS} Simpson intervals"),
        "baseline_composition": "depolarized component of weight 2 e_b, e_b = error_from_per(baseline_per_db)",
        "worst_phase_rule": "pointwise minimum PER over phases; ties go to the earlier phase",
        "worst_curve": sweep.worst_curve(),
        "encoder": sweep.config,
    });
    if let (Value::Object(m), Value::Object(e)) = (&mut metadata, extra) {
        m.extend(e);
    }
    Artifact {
        name: name.into(),
        columns: cols(&["abscissa", "phase_rad", "per_db", "qber"]),
        rows,
        metadata,
    }
}

fn worst_xy(sweep: &SweepResult) -> Vec<(f64, f64)> {
    sweep
        .worst_curve()
        .iter()
        .map(|w| (w.abscissa, w.per_db))
        .collect()
}

fn fig10_duty(cfg: &RunConfig) -> Result<Vec<Artifact>, PresetError> {
    let enc = cfg.encoder();
    let sweep = sweep_duty(&enc, &cfg.duty_grid.values(), &cfg.phases)?;
    let crossing = threshold_crossing(&worst_xy(&sweep), PER_THRESHOLD_DB, f64::NEG_INFINITY);
    let per_phase: Vec<Value> = cfg
        .phases
        .iter()
        .map(|&p| json!({"phase_rad": p, "crossing_duty": threshold_crossing(&sweep.curve(p), PER_THRESHOLD_DB, f64::NEG_INFINITY)}))
        .collect();
    Ok(vec![sweep_artifact(
        "fig10-duty",
        &sweep,
        json!({
            "abscissa": "duty cycle (pulse FWHM / drive FWHM)",
            "drive_fwhm_s": drive_fwhm(&enc.drive),
            "worst_crossing_duty": crossing,
            "crossing_per_phase": per_phase,
        }),
    )])
}

fn fig11_delay(cfg: &RunConfig) -> Result<Vec<Artifact>, PresetError> {
    let enc = cfg.encoder();
    let grid = cfg.delay_grid.values();
    let sweep = sweep_delay(&enc, &grid, &cfg.phases)?;
    let worst = worst_xy(&sweep);
    let positive = threshold_crossing(&worst, PER_THRESHOLD_DB, 0.0);
    let mirrored: Vec<(f64, f64)> = worst.iter().rev().map(|&(x, y)| (-x, y)).collect();
    let negative = threshold_crossing(&mirrored, PER_THRESHOLD_DB, 0.0).map(|x| -x);
    let duty = enc.pulse.map(|p| duty_cycle(&p, &enc.drive)).unwrap_or(0.0);
    Ok(vec![sweep_artifact(
        "fig11-delay",
        &sweep,
        json!({
            "abscissa": "pulse delay relative to drive peak, s",
            "duty_cycle": duty,
            "worst_crossing_delay_positive_s": positive,
            "worst_crossing_delay_negative_s": negative,
        }),
    )])
}

fn fig12_skr(cfg: &RunConfig) -> Result<Vec<Artifact>, PresetError> {
    let protocol = cfg.effective_protocol();
    let distances = cfg.distance_grid_km.values();
    let mut out = Vec::new();
    for &f_rep in &cfg.rep_rates_hz {
        let curve = rate_curve(&distances, f_rep, &protocol, &cfg.detector)?;
        let rows = curve
            .iter()
            .map(|p| {
                vec![
                    p.distance_km.into(),
                    p.transmittance.into(),
                    p.q_s.into(),
                    p.e_s.into(),
                    p.q_d.into(),
                    p.e_d_obs.into(),
                    p.y1_lower.into(),
                    p.e1_upper.into(),
                    p.skr_bps.into(),
                ]
            })
            .collect();
        let name = format!("fig12-skr-{}GHz", f_rep / 1e9);
        out.push(Artifact {
            metadata: json!({
                "preset": "fig12-skr",
                "rep_rate_hz": f_rep,
                "bound": BOUND_DESCRIPTION,
                "protocol": protocol,
                "detector": cfg.detector,
                "calibrated_defaults": "detector efficiency 0.70 and dark count 1e-9 per gate are calibration choices, not measured values",
                "table1_literal": cfg.table1_literal,
                "cutoff_distance_km": cutoff_distance(&curve),
                "y1_lower": "finite-key lower bound on the Z-basis single-photon yield",
                "e1_upper": "finite-key upper bound on the single-photon phase error",
            }),
            name,
            columns: cols(&[
                "distance_km",
                "transmittance",
                "q_s",
                "e_s",
                "q_d",
                "e_d_obs",
                "y1_lower",
                "e1_upper",
                "skr_bps",
            ]),
            rows,
        });
    }
    Ok(out)
}

fn golden_iqber() -> Result<Vec<Artifact>, PresetError> {
    let summary = check_iqber_golden()?;
    let rows = iqber_golden()
        .iter()
        .zip(&summary.checks)
        .map(|(r, c)| {
            vec![
                r.label.as_str().into(),
                r.drive.as_str().into(),
                r.c_a.into(),
                r.d_a.into(),
                r.c_b_perp.into(),
                r.d_b_perp.into(),
                c.iqber_percent.into(),
                c.expected_percent.into(),
                c.matches.into(),
            ]
        })
        .collect();
    Ok(vec![Artifact {
        name: "golden-iqber".into(),
        columns: cols(&[
            "label",
            "drive",
            "c_a",
            "d_a",
            "c_b_perp",
            "d_b_perp",
            "iqber_percent",
            "expected_percent",
            "match",
        ]),
        rows,
        metadata: json!({
            "preset": "golden-iqber",
            "formula": "(C_B_perp - D_B_perp) / (C_B_perp - D_B_perp + C_A - D_A)",
            "overall_percent": summary.overall_percent,
            "overall_rule": "pooled over H, L, R, V; compared after rounding to two decimals",
            "overall_matches": summary.overall_matches,
            "all_match": summary.checks.iter().all(|c| c.matches),
        }),
    }])
}

/// Worker count requested through `POLMOD_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>, String> {
    match std::env::var("POLMOD_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(format!("POLMOD_THREADS: {e}")),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!(
                "POLMOD_THREADS must be a positive integer, got `{s}`"
            )),
        },
    }
}
