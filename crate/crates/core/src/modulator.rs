//! Traveling-wave LiNbO3 phase modulator.
//!
//! Light co-propagating with the RF field sees the instantaneous voltage, so
//! the forward response is the constant half-wave voltage `V_πF`. Light
//! counter-propagating meets the RF wave only briefly and accumulates the
//! average voltage over the overlap; for a sine drive this gives
//!
//! ```text
//! V_πR(f) = V_πF · |2π f τ_d / sin(2π f τ_d)|
//! ```
//!
//! which diverges whenever the overlap window `2τ_d` spans whole RF periods.

use std::f64::consts::PI;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drive::{drive_voltage, DriveKind, DriveWaveform};
use crate::quadrature::{integrate_piecewise, QuadOptions, QuadratureError};
use crate::ParamError;

/// Default guard band on `|sin(2π f τ_d)|` below which `V_πR` is reported as
/// divergent.
pub const DIVERGENCE_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModulatorError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("frequency must be finite and >= 0, got {0}")]
    BadFrequency(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("CSV error: {0}")]
    Csv(String),
    #[error("no counter-propagating response {ratio} near tau_d = {seed:e} s at {frequency:e} Hz")]
    NoOperatingPoint {
        frequency: f64,
        ratio: f64,
        seed: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulatorParams {
    /// Forward half-wave voltage, V.
    pub v_pi_f: f64,
    /// Average co-transit time of optical and RF fields along the electrode, s.
    pub tau_d: f64,
    /// Waveguide length, m.
    pub length_l: f64,
    /// Optical refractive index of the crystal.
    pub n0: f64,
}

impl ModulatorParams {
    pub fn new(v_pi_f: f64, tau_d: f64, length_l: f64, n0: f64) -> Result<Self, ParamError> {
        let p = ModulatorParams {
            v_pi_f,
            tau_d,
            length_l,
            n0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(ParamError::new(name, "must be finite and > 0"))
            }
        };
        positive("v_pi_f", self.v_pi_f)?;
        positive("tau_d", self.tau_d)?;
        positive("length_l", self.length_l)?;
        if !(self.n0 > 1.0 && self.n0 < 5.0) {
            return Err(ParamError::new("n0", "must lie in (1, 5)"));
        }
        Ok(())
    }
}

impl Default for ModulatorParams {
    /// 5.06 V forward half-wave voltage, `τ_d` recovered from the 1.1 GHz
    /// point where `V_πR = 2 V_πF`, and a 3 cm LiNbO3 waveguide.
    fn default() -> Self {
        ModulatorParams {
            v_pi_f: 5.06,
            tau_d: tau_from_ratio_first_lobe(1.1e9, 2.0).expect("ratio 2 lies on the first lobe"),
            length_l: 0.03,
            n0: 2.2,
        }
    }
}

/// One measured `(f, V_πF, V_πR)` triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VpiMeasurement {
    #[serde(rename = "frequency_hz")]
    pub frequency: f64,
    #[serde(rename = "v_pi_forward_v")]
    pub v_pi_forward: f64,
    #[serde(rename = "v_pi_reverse_v")]
    pub v_pi_reverse: f64,
}

impl VpiMeasurement {
    pub fn validate(&self) -> Result<(), ParamError> {
        for (name, x) in [
            ("frequency_hz", self.frequency),
            ("v_pi_forward_v", self.v_pi_forward),
            ("v_pi_reverse_v", self.v_pi_reverse),
        ] {
            if !(x.is_finite() && x > 0.0) {
                return Err(ParamError::new(name, "must be finite and > 0"));
            }
        }
        Ok(())
    }
}

/// Reads measurements from CSV with header
/// `frequency_hz,v_pi_forward_v,v_pi_reverse_v`.
pub fn read_measurements<R: Read>(reader: R) -> Result<Vec<VpiMeasurement>, ModulatorError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| ModulatorError::Csv(e.to_string()))?
        .clone();
    let expected = ["frequency_hz", "v_pi_forward_v", "v_pi_reverse_v"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(ModulatorError::Csv(format!(
            "expected header `{}`, found `{}`",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<VpiMeasurement>().enumerate() {
        let m = row.map_err(|e| ModulatorError::Csv(e.to_string()))?;
        m.validate()
            .map_err(|e| ModulatorError::Csv(format!("row {}: {e}", i + 1)))?;
        out.push(m);
    }
    Ok(out)
}

/// Measured forward half-wave voltage at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VpiForwardPoint {
    pub frequency_hz: f64,
    pub v_pi_f_v: f64,
}

/// Checks an override table: positive finite values, strictly increasing
/// frequencies.
pub fn validate_forward_table(table: &[VpiForwardPoint]) -> Result<(), ParamError> {
    for (i, p) in table.iter().enumerate() {
        if !(p.frequency_hz.is_finite() && p.frequency_hz >= 0.0) {
            return Err(ParamError::new(
                format!("[{i}].frequency_hz"),
                "must be finite and >= 0",
            ));
        }
        if !(p.v_pi_f_v.is_finite() && p.v_pi_f_v > 0.0) {
            return Err(ParamError::new(
                format!("[{i}].v_pi_f_v"),
                "must be finite and > 0",
            ));
        }
    }
    if table
        .windows(2)
        .any(|w| !(w[1].frequency_hz > w[0].frequency_hz))
    {
        return Err(ParamError::new(
            "frequency_hz",
            "must be strictly increasing",
        ));
    }
    Ok(())
}

/// `V_πF` at `f`: linear interpolation in the table, flat outside it,
/// `p.v_pi_f` when the table is empty.
pub fn v_pi_forward_at(f: f64, p: &ModulatorParams, table: &[VpiForwardPoint]) -> f64 {
    let (first, last) = match (table.first(), table.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return p.v_pi_f,
    };
    if f <= first.frequency_hz {
        return first.v_pi_f_v;
    }
    if f >= last.frequency_hz {
        return last.v_pi_f_v;
    }
    let k = table.partition_point(|q| q.frequency_hz <= f);
    let (a, b) = (table[k - 1], table[k]);
    let t = (f - a.frequency_hz) / (b.frequency_hz - a.frequency_hz);
    a.v_pi_f_v + t * (b.v_pi_f_v - a.v_pi_f_v)
}

/// Phase imparted on co-propagating light: `π·v / V_πF`.
pub fn forward_phase(v: f64, p: &ModulatorParams) -> f64 {
    PI * v / p.v_pi_f
}

/// Result of evaluating the counter-propagating half-wave voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ReverseVpi {
    Finite(f64),
    /// `sin(2π f τ_d)` is inside the guard band; the model predicts no
    /// counter-propagating modulation at all.
    Divergent,
}

impl ReverseVpi {
    pub fn finite(self) -> Option<f64> {
        match self {
            ReverseVpi::Finite(v) => Some(v),
            ReverseVpi::Divergent => None,
        }
    }
}

/// `|x / sin x|`, with the removable singularity at 0 handled by series.
/// Returns `None` inside the divergence guard band.
fn x_over_sin(x: f64, guard: f64) -> Option<f64> {
    let ax = x.abs();
    if ax < 1e-4 {
        let x2 = x * x;
        return Some(1.0 + x2 / 6.0 + 7.0 * x2 * x2 / 360.0);
    }
    let s = x.sin();
    if s.abs() < guard {
        return None;
    }
    Some((ax / s).abs())
}

/// `V_πR(f)` with the default divergence guard.
pub fn v_pi_reverse(f: f64, p: &ModulatorParams) -> Result<ReverseVpi, ModulatorError> {
    v_pi_reverse_guarded(f, p, DIVERGENCE_GUARD)
}

pub fn v_pi_reverse_guarded(
    f: f64,
    p: &ModulatorParams,
    guard: f64,
) -> Result<ReverseVpi, ModulatorError> {
    if !(f.is_finite() && f >= 0.0) {
        return Err(ModulatorError::BadFrequency(f));
    }
    let x = 2.0 * PI * f * p.tau_d;
    Ok(match x_over_sin(x, guard) {
        Some(r) => ReverseVpi::Finite(p.v_pi_f * r),
        None => ReverseVpi::Divergent,
    })
}

/// Phase picked up by a pulse counter-propagating through the electrode,
/// entering at `entry_time`.
///
/// The pulse overlaps the RF wave for `2τ_d` and sees the mean voltage over
/// that window; the integral is evaluated by adaptive quadrature, not from
/// the closed-form response, so it can serve as an independent check.
pub fn reverse_phase_oracle(
    drive: &DriveWaveform,
    entry_time: f64,
    p: &ModulatorParams,
) -> Result<f64, ModulatorError> {
    let window = 2.0 * p.tau_d;
    let (a, b) = (entry_time, entry_time + window);
    // Scale the tolerance so the returned phase meets 1e-9 rad.
    let scale = PI / p.v_pi_f / window;
    let opts = QuadOptions {
        abs_tol: 1e-9 / scale,
        rel_tol: 0.0,
        max_intervals: 4000,
    };
    let r = integrate_piecewise(
        |t| drive_voltage(drive, t),
        a,
        b,
        &drive.breakpoints(a, b),
        opts,
    )?;
    Ok(scale * r.value)
}

/// Worst case of `|reverse_phase_oracle|` over entry times within one drive
/// period, and the entry time that attains it.
pub fn worst_reverse_phase(
    drive: &DriveWaveform,
    p: &ModulatorParams,
) -> Result<(f64, f64), ModulatorError> {
    if drive.amplitude_v0 == 0.0 {
        return Ok((0.0, 0.0));
    }
    let period = drive.period();
    const GRID: usize = 96;
    let phase_at = |t: f64| reverse_phase_oracle(drive, t, p).map(f64::abs);
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..GRID {
        let t = period * i as f64 / GRID as f64;
        let v = phase_at(t)?;
        if v > best.0 {
            best = (v, t);
        }
    }
    if drive.kind == DriveKind::Square {
        // Piecewise linear in entry time: the grid maximum sits on or next to
        // the plateau, refine on both neighbouring cells.
        let step = period / GRID as f64;
        let mut lo = best.1 - step;
        let mut hi = best.1 + step;
        for _ in 0..80 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if phase_at(m1)? < phase_at(m2)? {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        let t = 0.5 * (lo + hi);
        let v = phase_at(t)?;
        if v > best.0 {
            best = (v, t);
        }
        return Ok(best);
    }
    // Sine: the overlap integral is itself sinusoidal in entry time, so a
    // golden-section search on the bracketing cells converges to the peak.
    let step = period / GRID as f64;
    let (mut lo, mut hi) = (best.1 - step, best.1 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = phase_at(x1)?;
    let mut f2 = phase_at(x2)?;
    for _ in 0..60 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = phase_at(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = phase_at(x1)?;
        }
    }
    let t = 0.5 * (lo + hi);
    let v = phase_at(t)?;
    if v > best.0 {
        best = (v, t);
    }
    Ok(best)
}

/// Solves `x / sin x = ratio` on `(0, π)` for `ratio ≥ 1` and converts the
/// root to `τ_d` at frequency `f`.
pub fn tau_from_ratio_first_lobe(f: f64, ratio: f64) -> Result<f64, ModulatorError> {
    if !(ratio.is_finite() && ratio >= 1.0) {
        return Err(ModulatorError::Fit(format!("ratio {ratio} must be >= 1")));
    }
    if !(f.is_finite() && f > 0.0) {
        return Err(ModulatorError::BadFrequency(f));
    }
    let g = |x: f64| x_over_sin(x, 0.0).unwrap_or(f64::INFINITY) - ratio;
    let x = bisect(g, 0.0, PI - 1e-15);
    Ok(x / (2.0 * PI * f))
}

/// Finds `τ_d` such that `V_πR(f) / V_πF = ratio`, choosing the solution
/// closest to `seed_tau` among those flanking the divergence nearest to it.
///
/// Used to place the model at a measured near-divergence operating point.
pub fn tau_for_reverse_ratio(f: f64, ratio: f64, seed_tau: f64) -> Result<f64, ModulatorError> {
    let none = || ModulatorError::NoOperatingPoint {
        frequency: f,
        ratio,
        seed: seed_tau,
    };
    if !(f > 0.0 && seed_tau > 0.0 && ratio > 1.0) {
        return Err(none());
    }
    let seed_x = 2.0 * PI * f * seed_tau;
    let n = (seed_x / PI).round().max(1.0);
    let node = n * PI;
    let g = |x: f64| x_over_sin(x, 0.0).unwrap_or(f64::INFINITY) - ratio;
    let eps = 1e-12 * node;
    let mut roots = Vec::new();
    // x/|sin x| falls away from the node on either side until roughly the
    // middle of the lobe.
    for (lo, hi) in [(node - 0.5 * PI, node - eps), (node + eps, node + 0.5 * PI)] {
        if lo > 0.0 && (g(lo) < 0.0) != (g(hi) < 0.0) {
            roots.push(bisect(g, lo, hi));
        }
    }
    roots
        .into_iter()
        .min_by(|a, b| (a - seed_x).abs().total_cmp(&(b - seed_x).abs()))
        .map(|x| x / (2.0 * PI * f))
        .ok_or_else(none)
}

fn bisect<G: Fn(f64) -> f64>(g: G, mut lo: f64, mut hi: f64) -> f64 {
    let lo_neg = g(lo) < 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (g(mid) < 0.0) == lo_neg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Fit a single frequency-independent `V_πF`; otherwise each measurement
    /// is scaled by its own measured forward voltage.
    pub fit_v_pi_f: bool,
    /// Search interval for `τ_d`. `None` restricts the search to values that
    /// keep every measurement below the first divergence.
    pub tau_bounds: Option<(f64, f64)>,
    pub grid_points: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            fit_v_pi_f: false,
            tau_bounds: None,
            grid_points: 4000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub params: ModulatorParams,
    /// `(model − measured) / measured` per measurement, in input order.
    pub relative_residuals: Vec<f64>,
    pub rms_relative: f64,
}

/// Least-squares fit of `τ_d` (and optionally `V_πF`) to reverse half-wave
/// voltage measurements, minimizing relative error.
///
/// `base` supplies the waveguide length and index, which the fit does not
/// touch, and `V_πF` when the measurements are used with their own forward
/// values (reported as their mean).
pub fn fit_tau_d(
    data: &[VpiMeasurement],
    base: &ModulatorParams,
    opts: FitOptions,
) -> Result<FitReport, ModulatorError> {
    if data.is_empty() {
        return Err(ModulatorError::Fit("no measurements".into()));
    }
    for m in data {
        m.validate()?;
    }
    let f_max = data.iter().map(|m| m.frequency).fold(0.0, f64::max);
    let f_min = data
        .iter()
        .map(|m| m.frequency)
        .fold(f64::INFINITY, f64::min);
    if data.len() > 1 && f_max == f_min {
        return Err(ModulatorError::Fit(
            "all measurements share one frequency".into(),
        ));
    }
    let (tau_lo, tau_hi) = match opts.tau_bounds {
        Some((lo, hi)) if lo > 0.0 && hi > lo => (lo, hi),
        Some(b) => return Err(ModulatorError::Fit(format!("invalid tau bounds {b:?}"))),
        None => {
            let hi = 0.5 / f_max * (1.0 - 1e-9);
            (hi * 1e-9, hi)
        }
    };

    // For a given τ_d, the model is V_πF,i · r_i(τ).
    let shapes = |tau: f64| -> Option<Vec<f64>> {
        data.iter()
            .map(|m| x_over_sin(2.0 * PI * m.frequency * tau, DIVERGENCE_GUARD))
            .collect()
    };
    let scale_for = |r: &[f64]| -> Vec<f64> {
        if opts.fit_v_pi_f {
            // argmin_v Σ (v r_i / y_i − 1)² = Σ(r_i/y_i) / Σ(r_i/y_i)²
            let (num, den) = data.iter().zip(r).fold((0.0, 0.0), |(n, d), (m, ri)| {
                let q = ri / m.v_pi_reverse;
                (n + q, d + q * q)
            });
            vec![num / den; data.len()]
        } else {
            data.iter().map(|m| m.v_pi_forward).collect()
        }
    };
    let cost = |tau: f64| -> f64 {
        match shapes(tau) {
            Some(r) => {
                let v = scale_for(&r);
                data.iter()
                    .zip(r.iter().zip(&v))
                    .map(|(m, (ri, vi))| (vi * ri / m.v_pi_reverse - 1.0).powi(2))
                    .sum()
            }
            None => f64::INFINITY,
        }
    };

    let n = opts.grid_points.max(16);
    let ln_lo = tau_lo.ln();
    let ln_hi = tau_hi.ln();
    let at = |i: usize| (ln_lo + (ln_hi - ln_lo) * i as f64 / (n - 1) as f64).exp();
    let best_i = (0..n)
        .map(|i| (i, cost(at(i))))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .unwrap();
    let mut lo = at(best_i.saturating_sub(1));
    let mut hi = at((best_i + 1).min(n - 1));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut c1, mut c2) = (cost(x1), cost(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi {
            break;
        }
        if c1 < c2 {
            hi = x2;
            x2 = x1;
            c2 = c1;
            x1 = hi - g * (hi - lo);
            c1 = cost(x1);
        } else {
            lo = x1;
            x1 = x2;
            c1 = c2;
            x2 = lo + g * (hi - lo);
            c2 = cost(x2);
        }
    }
    let tau = 0.5 * (lo + hi);
    let r =
        shapes(tau).ok_or_else(|| ModulatorError::Fit("optimum sits on a divergence".into()))?;
    let v = scale_for(&r);
    let relative_residuals: Vec<f64> = data
        .iter()
        .zip(r.iter().zip(&v))
        .map(|(m, (ri, vi))| vi * ri / m.v_pi_reverse - 1.0)
        .collect();
    let rms_relative = (relative_residuals.iter().map(|x| x * x).sum::<f64>()
        / relative_residuals.len() as f64)
        .sqrt();
    let v_pi_f = if opts.fit_v_pi_f {
        v[0]
    } else {
        data.iter().map(|m| m.v_pi_forward).sum::<f64>() / data.len() as f64
    };
    let params = ModulatorParams {
        v_pi_f,
        tau_d: tau,
        ..*base
    };
    params.validate()?;
    Ok(FitReport {
        params,
        relative_residuals,
        rms_relative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(tau_d: f64) -> ModulatorParams {
        ModulatorParams::new(5.0, tau_d, 0.03, 2.2).unwrap()
    }

    #[test]
    fn forward_table_interpolates_and_clamps() {
        let p = params(0.27e-9);
        assert_eq!(v_pi_forward_at(3e9, &p, &[]), 5.0);
        let t = [
            VpiForwardPoint {
                frequency_hz: 1e9,
                v_pi_f_v: 4.0,
            },
            VpiForwardPoint {
                frequency_hz: 3e9,
                v_pi_f_v: 5.0,
            },
            VpiForwardPoint {
                frequency_hz: 4e9,
                v_pi_f_v: 7.0,
            },
        ];
        validate_forward_table(&t).unwrap();
        assert_eq!(v_pi_forward_at(0.0, &p, &t), 4.0);
        assert_eq!(v_pi_forward_at(1e9, &p, &t), 4.0);
        assert_relative_eq!(v_pi_forward_at(2e9, &p, &t), 4.5, max_relative = 1e-15);
        assert_eq!(v_pi_forward_at(3e9, &p, &t), 5.0);
        assert_relative_eq!(v_pi_forward_at(3.5e9, &p, &t), 6.0, max_relative = 1e-15);
        assert_eq!(v_pi_forward_at(9e9, &p, &t), 7.0);
        let bad = [t[1], t[0]];
        assert!(validate_forward_table(&bad).is_err());
        let bad = [VpiForwardPoint {
            frequency_hz: 1e9,
            v_pi_f_v: 0.0,
        }];
        assert_eq!(
            validate_forward_table(&bad).unwrap_err().field,
            "[0].v_pi_f_v"
        );
    }

    #[test]
    fn forward_phase_is_linear() {
        let p = params(0.27e-9);
        assert_eq!(forward_phase(0.0, &p), 0.0);
        assert_relative_eq!(forward_phase(5.0, &p), PI, max_relative = 1e-15);
        assert_relative_eq!(forward_phase(2.5, &p), PI / 2.0, max_relative = 1e-15);
    }

    #[test]
    fn reverse_limit_at_dc() {
        let p = params(0.27e-9);
        assert_eq!(v_pi_reverse(0.0, &p).unwrap(), ReverseVpi::Finite(5.0));
        let tiny = v_pi_reverse(1e3, &p).unwrap().finite().unwrap();
        assert_relative_eq!(tiny, 5.0, max_relative = 1e-9);
        // Just either side of the series switch-over the two branches agree.
        let f_switch = 1e-4 / (2.0 * PI * p.tau_d);
        let a = v_pi_reverse(f_switch * 0.999_999, &p)
            .unwrap()
            .finite()
            .unwrap();
        let b = v_pi_reverse(f_switch * 1.000_001, &p)
            .unwrap()
            .finite()
            .unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn reverse_divergence_and_errors() {
        let p = params(0.25e-9);
        // 2π f τ_d = π at f = 1/(2 τ_d) = 2 GHz
        assert_eq!(v_pi_reverse(2e9, &p).unwrap(), ReverseVpi::Divergent);
        assert!(matches!(
            v_pi_reverse(-1.0, &p),
            Err(ModulatorError::BadFrequency(_))
        ));
        assert!(matches!(
            v_pi_reverse(f64::NAN, &p),
            Err(ModulatorError::BadFrequency(_))
        ));
    }

    #[test]
    fn params_validation() {
        assert_eq!(
            ModulatorParams::new(0.0, 1e-10, 0.03, 2.2)
                .unwrap_err()
                .field,
            "v_pi_f"
        );
        assert_eq!(
            ModulatorParams::new(5.0, 1e-10, 0.03, 5.5)
                .unwrap_err()
                .field,
            "n0"
        );
    }

    /// Independent root of x/sin(x) = 2 by plain bisection on (0, π).
    fn ratio_two_root() -> f64 {
        let (mut lo, mut hi) = (1.0f64, 3.0f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid / mid.sin() < 2.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn single_anchor_fit() {
        let x_star = ratio_two_root();
        assert!((x_star - 1.8955).abs() < 1e-4, "{x_star}");
        let data = [VpiMeasurement {
            frequency: 1.1e9,
            v_pi_forward: 4.3,
            v_pi_reverse: 8.6,
        }];
        let fit = fit_tau_d(&data, &params(1e-10), FitOptions::default()).unwrap();
        assert_relative_eq!(
            fit.params.tau_d,
            x_star / (2.0 * PI * 1.1e9),
            max_relative = 1e-9
        );
        assert!(fit.rms_relative < 1e-12);
        assert_relative_eq!(
            tau_from_ratio_first_lobe(1.1e9, 2.0).unwrap(),
            fit.params.tau_d,
            max_relative = 1e-9
        );
    }

    #[test]
    fn synthetic_round_trip() {
        let truth = params(0.27e-9);
        let data: Vec<_> = [0.2e9, 0.5e9, 0.8e9, 1.1e9, 1.4e9, 1.7e9]
            .iter()
            .map(|&f| VpiMeasurement {
                frequency: f,
                v_pi_forward: truth.v_pi_f,
                v_pi_reverse: v_pi_reverse(f, &truth).unwrap().finite().unwrap(),
            })
            .collect();
        let fit = fit_tau_d(&data, &params(1e-10), FitOptions::default()).unwrap();
        assert_relative_eq!(fit.params.tau_d, 0.27e-9, max_relative = 1e-6);
        let fit = fit_tau_d(
            &data,
            &params(1e-10),
            FitOptions {
                fit_v_pi_f: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_relative_eq!(fit.params.tau_d, 0.27e-9, max_relative = 1e-6);
        assert_relative_eq!(fit.params.v_pi_f, 5.0, max_relative = 1e-6);
    }

    #[test]
    fn degenerate_fits() {
        assert!(matches!(
            fit_tau_d(&[], &params(1e-10), FitOptions::default()),
            Err(ModulatorError::Fit(_))
        ));
        let m = VpiMeasurement {
            frequency: 1e9,
            v_pi_forward: 5.0,
            v_pi_reverse: 7.0,
        };
        assert!(matches!(
            fit_tau_d(&[m, m, m], &params(1e-10), FitOptions::default()),
            Err(ModulatorError::Fit(_))
        ));
    }

    #[test]
    fn operating_point_near_divergence() {
        let seed = tau_from_ratio_first_lobe(1.1e9, 2.0).unwrap();
        let ratio = 781.4 / 5.06;
        let tau = tau_for_reverse_ratio(10e9, ratio, seed).unwrap();
        let p = ModulatorParams::new(5.06, tau, 0.03, 2.2).unwrap();
        let v = v_pi_reverse(10e9, &p).unwrap().finite().unwrap();
        assert_relative_eq!(v, 781.4, max_relative = 1e-9);
        assert!((tau - seed).abs() < 0.1 * seed);
    }

    #[test]
    fn oracle_constant_drive_matches_forward() {
        let p = params(0.27e-9);
        // A square drive whose flat top covers the whole window acts as DC.
        let mut w = DriveWaveform::square(1.3, 1e8, 5e-9);
        w.delay = -1e-9;
        let phase = reverse_phase_oracle(&w, 0.0, &p).unwrap();
        assert_relative_eq!(phase, forward_phase(1.3, &p), max_relative = 1e-9);
    }

    #[test]
    fn oracle_whole_periods_cancel() {
        // 2τ_d = 3 periods at 6 GHz with τ_d = 0.25 ns.
        let p = params(0.25e-9);
        let w = DriveWaveform::sine(5.0, 6e9);
        for entry in [0.0, 13e-12, 71e-12] {
            assert!(reverse_phase_oracle(&w, entry, &p).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn worst_case_matches_closed_form() {
        let p = params(0.27e-9);
        let f = 3.3e9;
        let w = DriveWaveform::sine(p.v_pi_f / PI, f);
        let (worst, _) = worst_reverse_phase(&w, &p).unwrap();
        let ratio = p.v_pi_f / v_pi_reverse(f, &p).unwrap().finite().unwrap();
        assert_relative_eq!(worst, ratio, max_relative = 1e-6);
    }

    #[test]
    fn csv_ingestion() {
        let text = "frequency_hz,v_pi_forward_v,v_pi_reverse_v\n1.1e9,4.3,8.6\n1e10, 5.06, 67.4\n";
        let rows = read_measurements(text.as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].v_pi_reverse, 67.4);
        let bad = "freq,a,b\n1,2,3\n";
        assert!(matches!(
            read_measurements(bad.as_bytes()),
            Err(ModulatorError::Csv(_))
        ));
        let neg = "frequency_hz,v_pi_forward_v,v_pi_reverse_v\n-1,2,3\n";
        assert!(read_measurements(neg.as_bytes()).is_err());
    }
}
