//! Run configuration: one JSON document layered over built-in defaults.
//!
//! Any subset of keys may be given; nested objects merge key by key. Keys
//! that do not exist in the defaults are rejected with their dotted path.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::drive::{DriveWaveform, PulseShape};
use crate::encoder::EncoderConfig;
use crate::modulator::{validate_forward_table, ModulatorParams, VpiForwardPoint};
use crate::skr::{DetectorModel, ProtocolParams, TABLE1_LITERAL_U_V};
use crate::ParamError;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("config must be a JSON object")]
    NotAnObject,
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}`: {message}")]
    Type { key: String, message: String },
    #[error(transparent)]
    Invalid(#[from] ParamError),
}

impl ConfigError {
    /// True for problems with the document itself rather than the
    /// environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, ConfigError::Io { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Linspace {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

/// A sweep grid: evenly spaced points or an explicit increasing list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    // Listed first: a struct would also accept a positional array.
    Values(Vec<f64>),
    Linspace(Linspace),
}

impl Grid {
    pub fn linspace(start: f64, stop: f64, points: usize) -> Self {
        Grid::Linspace(Linspace {
            start,
            stop,
            points,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Values(v) => v.clone(),
            Grid::Linspace(l) if l.points == 1 => vec![l.start],
            Grid::Linspace(l) => {
                let step = (l.stop - l.start) / (l.points - 1) as f64;
                (0..l.points)
                    .map(|i| {
                        if i + 1 == l.points {
                            l.stop
                        } else {
                            l.start + step * i as f64
                        }
                    })
                    .collect()
            }
        }
    }

    fn validate(&self, key: &str, min: f64) -> Result<(), ParamError> {
        if let Grid::Linspace(l) = self {
            if l.points == 0 {
                return Err(ParamError::new(format!("{key}.points"), "must be >= 1"));
            }
            if !(l.start.is_finite() && l.stop.is_finite() && (l.stop > l.start || l.points == 1)) {
                return Err(ParamError::new(key, "needs finite start < stop"));
            }
        }
        let v = self.values();
        if v.is_empty() {
            return Err(ParamError::new(key, "must not be empty"));
        }
        if v.iter().any(|x| !x.is_finite() || *x < min) {
            return Err(ParamError::new(
                key,
                format!("values must be finite and >= {min}"),
            ));
        }
        if v.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ParamError::new(key, "must be strictly increasing"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub modulator: ModulatorParams,
    pub drive: DriveWaveform,
    /// `null` selects an ideal zero-width pulse.
    pub pulse: Option<PulseShape>,
    pub baseline_per_db: f64,
    pub rf_transfer_efficiency: f64,
    pub include_reverse_residual: bool,
    /// Target modulation phases, rad.
    pub phases: Vec<f64>,
    pub duty_grid: Grid,
    /// Pulse-to-drive delay, s.
    pub delay_grid: Grid,
    /// Frequencies for the half-wave voltage curve, Hz.
    pub frequency_grid: Grid,
    /// Optional CSV of measured half-wave voltages to fit `tau_d` against.
    pub vpi_measurements: Option<PathBuf>,
    /// Per-frequency `V_πF` for the half-wave voltage curve; empty uses
    /// `modulator.v_pi_f` everywhere.
    pub v_pi_f_overrides: Vec<VpiForwardPoint>,
    pub distance_grid_km: Grid,
    pub rep_rates_hz: Vec<f64>,
    pub protocol: ProtocolParams,
    pub detector: DetectorModel,
    /// Use the weakest intensity exactly as tabulated (0.35) instead of a
    /// true vacuum decoy.
    pub table1_literal: bool,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let enc = EncoderConfig::default();
        RunConfig {
            preset: None,
            modulator: enc.modulator,
            drive: enc.drive,
            pulse: enc.pulse,
            baseline_per_db: enc.baseline_per_db,
            rf_transfer_efficiency: enc.rf_transfer_efficiency,
            include_reverse_residual: enc.include_reverse_residual,
            phases: vec![PI / 2.0, PI, 1.5 * PI],
            duty_grid: Grid::linspace(0.0, 0.5, 201),
            delay_grid: Grid::linspace(-10e-12, 10e-12, 201),
            frequency_grid: Grid::linspace(0.0, 12e9, 1201),
            vpi_measurements: None,
            v_pi_f_overrides: Vec::new(),
            distance_grid_km: Grid::linspace(0.0, 400.0, 401),
            rep_rates_hz: vec![1e9, 2.5e9, 10e9],
            protocol: ProtocolParams::default(),
            detector: DetectorModel::default(),
            table1_literal: false,
            output: OutputConfig {
                dir: PathBuf::from("polmod-out"),
            },
        }
    }
}

impl RunConfig {
    pub fn encoder(&self) -> EncoderConfig {
        EncoderConfig {
            modulator: self.modulator,
            drive: self.drive,
            pulse: self.pulse,
            baseline_per_db: self.baseline_per_db,
            rf_transfer_efficiency: self.rf_transfer_efficiency,
            include_reverse_residual: self.include_reverse_residual,
        }
    }

    /// Protocol parameters with the `table1_literal` switch applied.
    pub fn effective_protocol(&self) -> ProtocolParams {
        let mut p = self.protocol;
        if self.table1_literal {
            p.u_v = TABLE1_LITERAL_U_V;
        }
        p
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let enc = self.encoder();
        enc.validate()?;
        if self.phases.is_empty() || self.phases.iter().any(|p| !p.is_finite()) {
            return Err(ParamError::new(
                "phases",
                "must be a non-empty list of finite values",
            ));
        }
        self.duty_grid.validate("duty_grid", 0.0)?;
        let max_duty = self.duty_grid.values().last().copied().unwrap_or(0.0);
        enc.with_duty(max_duty).map_err(|e| {
            ParamError::new(
                "duty_grid",
                format!("largest duty gives an invalid pulse ({e})"),
            )
        })?;
        self.delay_grid.validate("delay_grid", f64::NEG_INFINITY)?;
        self.frequency_grid.validate("frequency_grid", 0.0)?;
        validate_forward_table(&self.v_pi_f_overrides).map_err(|e| {
            ParamError::new(
                format!(
                    "v_pi_f_overrides{}",
                    e.field.trim_start_matches(|c| c != '[')
                ),
                e.constraint,
            )
        })?;
        self.distance_grid_km.validate("distance_grid_km", 0.0)?;
        if self.rep_rates_hz.is_empty()
            || self
                .rep_rates_hz
                .iter()
                .any(|f| !(f.is_finite() && *f > 0.0))
        {
            return Err(ParamError::new(
                "rep_rates_hz",
                "must be a non-empty list of positive values",
            ));
        }
        self.effective_protocol()
            .validate()
            .map_err(|e| e.within("protocol"))?;
        self.detector.validate().map_err(|e| e.within("detector"))?;
        Ok(())
    }
}

fn merge(base: &mut Value, user: Value, path: &str) -> Result<(), ConfigError> {
    match (base, user) {
        (Value::Object(b), Value::Object(u)) => {
            for (k, v) in u {
                let key = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v, &key)?,
                    None => return Err(ConfigError::UnknownKey(key)),
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v;
            Ok(())
        }
    }
}

fn field<T: DeserializeOwned>(obj: &mut Map<String, Value>, key: &str) -> Result<T, ConfigError> {
    let v = obj.remove(key).unwrap_or(Value::Null);
    serde_json::from_value(v).map_err(|e| ConfigError::Type {
        key: key.to_string(),
        message: e.to_string(),
    })
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let user: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if !user.is_object() {
        return Err(ConfigError::NotAnObject);
    }
    let mut merged = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
    merge(&mut merged, user, "")?;
    let Value::Object(mut m) = merged else {
        unreachable!()
    };
    let cfg = RunConfig {
        preset: field(&mut m, "preset")?,
        modulator: field(&mut m, "modulator")?,
        drive: field(&mut m, "drive")?,
        pulse: field(&mut m, "pulse")?,
        baseline_per_db: field(&mut m, "baseline_per_db")?,
        rf_transfer_efficiency: field(&mut m, "rf_transfer_efficiency")?,
        include_reverse_residual: field(&mut m, "include_reverse_residual")?,
        phases: field(&mut m, "phases")?,
        duty_grid: field(&mut m, "duty_grid")?,
        delay_grid: field(&mut m, "delay_grid")?,
        frequency_grid: field(&mut m, "frequency_grid")?,
        vpi_measurements: field(&mut m, "vpi_measurements")?,
        v_pi_f_overrides: field(&mut m, "v_pi_f_overrides")?,
        distance_grid_km: field(&mut m, "distance_grid_km")?,
        rep_rates_hz: field(&mut m, "rep_rates_hz")?,
        protocol: field(&mut m, "protocol")?,
        detector: field(&mut m, "detector")?,
        table1_literal: field(&mut m, "table1_literal")?,
        output: field(&mut m, "output")?,
    };
    debug_assert!(m.is_empty(), "every default key is consumed");
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

/// Pretty JSON of the defaults, optionally with a preset name filled in.
pub fn defaults_json(preset: Option<&str>) -> String {
    let cfg = RunConfig {
        preset: preset.map(str::to_string),
        ..RunConfig::default()
    };
    serde_json::to_string_pretty(&cfg).expect("defaults serialize")
}
