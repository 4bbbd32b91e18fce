//! Decoy-state BB84 secure key rate over a lossy fiber channel.
//!
//! The channel and detectors follow the usual Poissonian model: a pulse of
//! mean photon number `μ` through transmittance `η` is detected with
//! probability `Q_μ = 1 − (1 − 2p_dc)·e^{−ημ}` and errs with
//! `E_μ·Q_μ = Q_μ/2 − (1/2 − e_d)(1 − e^{−ημ})`.
//!
//! Single-photon yield and error are bounded with the three-intensity
//! analytic decoy bounds (signal `μ1 > μ2 + μ3`, `μ3 ≥ 0`), and the key
//! length per block uses the finite-key expression
//!
//! ```text
//! ℓ = s_Z0 + s_Z1·(1 − h(φ_Z)) − λ_EC − 6·log2(21/ε_sec) − log2(2/ε_cor)
//! ```
//!
//! with Hoeffding deviations `sqrt(n/2 · ln(21/ε_sec))` on every count and
//! the random-sampling correction on the phase error. Keys come from the Z
//! basis only (sifting factor `P_z²`), the phase error is estimated in X.

use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ParamError;

/// Human-readable statement of the bound, echoed into output metadata.
pub const BOUND_DESCRIPTION: &str = "three-intensity decoy BB84, Z-basis key (sifting P_z^2), X-basis phase error; \
s_Z1 lower / v_X1 upper from analytic decoy bounds with mu1 > mu2 + mu3 >= 0; \
Hoeffding deviation sqrt(n/2 ln(21/eps_sec)) on each count; phi_Z = v_X1/s_X1 + gamma(eps_sec, v/s, s_Z1, s_X1); \
l = s_Z0 + s_Z1 (1 - h(phi_Z)) - f_EC n_Z h(E_Z) - 6 log2(21/eps_sec) - log2(2/eps_cor); \
block closes when n_Z detections are sifted; SKR = f_rep * max(l, 0) / N_block";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SkrError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("binary entropy argument {0} outside [0, 1]")]
    EntropyDomain(f64),
    #[error(
        "decoy bounds undefined: intensities {0:?} must satisfy mu1 > mu2 + mu3 and mu2 > mu3 >= 0"
    )]
    DegenerateIntensities([f64; 3]),
    #[error("observation {0:?} is unphysical")]
    BadObservation(DecoyObservation),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolParams {
    pub p_d: f64,
    pub p_s: f64,
    pub p_z: f64,
    pub n_z: f64,
    pub u_d: f64,
    pub u_s: f64,
    /// Weakest intensity. `0.0` is a true vacuum decoy.
    pub u_v: f64,
    pub e_d: f64,
    pub f_ec: f64,
    pub eps_sec: f64,
    #[serde(default = "default_eps_cor")]
    pub eps_cor: f64,
    pub alpha_db_per_km: f64,
}

fn default_eps_cor() -> f64 {
    1e-15
}

/// The weakest intensity as printed in the parameter table.
pub const TABLE1_LITERAL_U_V: f64 = 0.35;

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            p_d: 0.25,
            p_s: 0.5,
            p_z: 0.5,
            n_z: 1e8,
            u_d: 0.11,
            u_s: 0.54,
            u_v: 0.0,
            e_d: 0.005,
            f_ec: 1.05,
            eps_sec: 1e-10,
            eps_cor: default_eps_cor(),
            alpha_db_per_km: 0.19,
        }
    }
}

impl ProtocolParams {
    /// Table values with the third intensity taken verbatim (0.35).
    pub fn table1_literal() -> Self {
        ProtocolParams {
            u_v: TABLE1_LITERAL_U_V,
            ..Self::default()
        }
    }

    pub fn p_v(&self) -> f64 {
        1.0 - self.p_s - self.p_d
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let open_unit = |name: &str, x: f64| {
            if x > 0.0 && x < 1.0 {
                Ok(())
            } else {
                Err(ParamError::new(name, "must lie in (0, 1)"))
            }
        };
        open_unit("p_d", self.p_d)?;
        open_unit("p_s", self.p_s)?;
        open_unit("p_z", self.p_z)?;
        open_unit("eps_sec", self.eps_sec)?;
        open_unit("eps_cor", self.eps_cor)?;
        if !(self.p_s + self.p_d < 1.0) {
            return Err(ParamError::new(
                "p_s",
                "p_s + p_d must be < 1 to leave a weakest-intensity share",
            ));
        }
        if !(self.n_z.is_finite() && self.n_z >= 1.0) {
            return Err(ParamError::new("n_z", "must be finite and >= 1"));
        }
        for (name, x) in [("u_d", self.u_d), ("u_s", self.u_s), ("u_v", self.u_v)] {
            if !(x.is_finite() && x >= 0.0) {
                return Err(ParamError::new(name, "must be finite and >= 0"));
            }
        }
        if !(self.e_d >= 0.0 && self.e_d <= 0.5) {
            return Err(ParamError::new("e_d", "must lie in [0, 0.5]"));
        }
        if !(self.f_ec.is_finite() && self.f_ec >= 1.0) {
            return Err(ParamError::new("f_ec", "must be >= 1"));
        }
        if !(self.alpha_db_per_km.is_finite() && self.alpha_db_per_km >= 0.0) {
            return Err(ParamError::new(
                "alpha_db_per_km",
                "must be finite and >= 0",
            ));
        }
        Ok(())
    }

    /// `(μ, p)` per intensity sorted strongest first.
    fn intensities(&self) -> [(f64, f64); 3] {
        let mut v = [
            (self.u_s, self.p_s),
            (self.u_d, self.p_d),
            (self.u_v, self.p_v()),
        ];
        v.sort_by(|a, b| b.0.total_cmp(&a.0));
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorModel {
    pub efficiency: f64,
    /// Dark count probability per gate, per detector.
    pub dark_count_prob: f64,
}

impl Default for DetectorModel {
    /// Calibrated so that the zero-rate distance lies beyond 350 km; these are
    /// not measured values.
    fn default() -> Self {
        DetectorModel {
            efficiency: 0.70,
            dark_count_prob: 1e-9,
        }
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(ParamError::new("efficiency", "must lie in (0, 1]"));
        }
        if !(self.dark_count_prob >= 0.0 && self.dark_count_prob <= 1e-3) {
            return Err(ParamError::new("dark_count_prob", "must lie in [0, 1e-3]"));
        }
        Ok(())
    }
}

/// A loss model mapping distance to channel transmittance.
pub trait Channel {
    fn transmittance(&self, distance_km: f64) -> f64;
}

/// Fiber with constant loss per km.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberChannel {
    pub alpha_db_per_km: f64,
}

impl Channel for FiberChannel {
    fn transmittance(&self, distance_km: f64) -> f64 {
        10f64.powf(-self.alpha_db_per_km * distance_km / 10.0)
    }
}

/// Overall transmittance including detector efficiency.
pub fn transmittance(distance_km: f64, alpha_db_per_km: f64, det: &DetectorModel) -> f64 {
    det.efficiency * FiberChannel { alpha_db_per_km }.transmittance(distance_km)
}

/// Expected gain and QBER for intensity `mu`.
pub fn gain_and_qber(mu: f64, eta: f64, e_d: f64, dark: f64) -> (f64, f64) {
    let detected = -(-eta * mu).exp_m1();
    let q = 1.0 - (1.0 - 2.0 * dark) * (-eta * mu).exp();
    if q <= 0.0 {
        return (0.0, 0.5);
    }
    let eq = 0.5 * q - (0.5 - e_d) * detected;
    (q, (eq / q).clamp(0.0, 0.5))
}

pub fn binary_entropy(x: f64) -> Result<f64, SkrError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(SkrError::EntropyDomain(x));
    }
    Ok(h(x))
}

fn h(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
    }
}

/// Gain and QBER observed at one intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyObservation {
    pub mu: f64,
    pub gain: f64,
    pub qber: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecoyBounds {
    pub y0_lower: f64,
    pub y1_lower: f64,
    pub e1_upper: f64,
}

/// Lower bounds on `Y0` and `Y1` from yield-normalized gains
/// `G_k = e^{μk} Q_k`, given per-intensity lower/upper estimates.
fn yield_bounds(mu: [f64; 3], g_lo: [f64; 3], g_hi: [f64; 3]) -> (f64, f64) {
    let [m1, m2, m3] = mu;
    let y0 = ((m2 * g_lo[2] - m3 * g_hi[1]) / (m2 - m3)).max(0.0);
    let y1 = m1 / (m1 * (m2 - m3) - m2 * m2 + m3 * m3)
        * (g_lo[1] - g_hi[2] - (m2 * m2 - m3 * m3) / (m1 * m1) * (g_hi[0] - y0));
    (y0, y1)
}

/// Upper bound on `e1·Y1` from yield-normalized error gains.
fn error_yield_bound(mu: [f64; 3], eg_lo: [f64; 3], eg_hi: [f64; 3]) -> f64 {
    (eg_hi[1] - eg_lo[2]) / (mu[1] - mu[2])
}

fn sorted_mu(obs: &[DecoyObservation; 3]) -> Result<[DecoyObservation; 3], SkrError> {
    let mut o = *obs;
    o.sort_by(|a, b| b.mu.total_cmp(&a.mu));
    let mu = [o[0].mu, o[1].mu, o[2].mu];
    if !(mu[2] >= 0.0 && mu[1] > mu[2] && mu[0] > mu[1] + mu[2]) {
        return Err(SkrError::DegenerateIntensities(mu));
    }
    Ok(o)
}

/// Asymptotic single-photon bounds from three observed intensities.
///
/// When the yield bound collapses to zero or below the result is reported
/// as `y1_lower = 0, e1_upper = 1/2`, i.e. no key.
pub fn decoy_bounds(obs: &[DecoyObservation; 3]) -> Result<DecoyBounds, SkrError> {
    for o in obs {
        if !(o.gain >= 0.0 && o.gain <= 1.0 && o.qber >= 0.0 && o.qber <= 1.0) {
            return Err(SkrError::BadObservation(*o));
        }
    }
    let o = sorted_mu(obs)?;
    let mu = [o[0].mu, o[1].mu, o[2].mu];
    let g: [f64; 3] = std::array::from_fn(|k| o[k].mu.exp() * o[k].gain);
    let eg: [f64; 3] = std::array::from_fn(|k| g[k] * o[k].qber);
    let (y0, y1) = yield_bounds(mu, g, g);
    if y1 <= 0.0 {
        return Ok(DecoyBounds {
            y0_lower: y0,
            y1_lower: 0.0,
            e1_upper: 0.5,
        });
    }
    let e1 = (error_yield_bound(mu, eg, eg) / y1).clamp(0.0, 0.5);
    Ok(DecoyBounds {
        y0_lower: y0,
        y1_lower: y1.min(1.0),
        e1_upper: e1,
    })
}

/// Random-sampling correction for estimating the Z-basis phase error from
/// X-basis statistics.
fn sampling_gamma(eps: f64, rate: f64, c: f64, d: f64) -> f64 {
    if rate <= 0.0 {
        return 0.0;
    }
    if rate >= 1.0 {
        return f64::INFINITY;
    }
    let b = rate;
    let inner = (c + d) / (c * d * (1.0 - b) * b) * (21.0f64).powi(2) / (eps * eps);
    ((c + d) * (1.0 - b) * b / (c * d * LN_2) * inner.log2())
        .max(0.0)
        .sqrt()
}

/// Everything that goes into one point of the key-rate curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateCurvePoint {
    pub distance_km: f64,
    pub transmittance: f64,
    pub q_s: f64,
    pub e_s: f64,
    pub q_d: f64,
    pub e_d_obs: f64,
    /// Finite-key lower bound on the single-photon yield (Z basis).
    pub y1_lower: f64,
    /// Finite-key upper bound on the single-photon phase error.
    pub e1_upper: f64,
    /// Secret bits per pulse sent.
    pub secret_fraction: f64,
    /// Pulses sent per block.
    pub block_pulses: f64,
    pub skr_bps: f64,
}

struct BasisBounds {
    s0: f64,
    s1: f64,
    v1: f64,
    detections: f64,
    errors: f64,
}

fn finite_bounds(
    mu: [f64; 3],
    p: [f64; 3],
    q: [f64; 3],
    e: [f64; 3],
    basis_pulses: f64,
    eps_sec: f64,
) -> BasisBounds {
    let n: [f64; 3] = std::array::from_fn(|k| basis_pulses * p[k] * q[k]);
    let m: [f64; 3] = std::array::from_fn(|k| n[k] * e[k]);
    let n_tot: f64 = n.iter().sum();
    let m_tot: f64 = m.iter().sum();
    let ln = (21.0 / eps_sec).ln();
    let dn = (n_tot / 2.0 * ln).sqrt();
    let dm = (m_tot / 2.0 * ln).sqrt();
    let norm = |k: usize, x: f64| mu[k].exp() * x / (p[k] * basis_pulses);
    let g_lo = std::array::from_fn(|k| norm(k, (n[k] - dn).max(0.0)));
    let g_hi = std::array::from_fn(|k| norm(k, n[k] + dn));
    let eg_lo = std::array::from_fn(|k| norm(k, (m[k] - dm).max(0.0)));
    let eg_hi = std::array::from_fn(|k| norm(k, m[k] + dm));
    let tau = |order: i32| -> f64 {
        (0..3)
            .map(|k| p[k] * (-mu[k]).exp() * mu[k].powi(order))
            .sum()
    };
    let (y0, y1) = yield_bounds(mu, g_lo, g_hi);
    let ey1 = error_yield_bound(mu, eg_lo, eg_hi).max(0.0);
    BasisBounds {
        s0: basis_pulses * tau(0) * y0,
        s1: basis_pulses * tau(1) * y1,
        v1: basis_pulses * tau(1) * ey1,
        detections: n_tot,
        errors: m_tot,
    }
}

/// Full key-rate evaluation at one distance and clock rate.
pub fn rate_point(
    distance_km: f64,
    f_rep: f64,
    p: &ProtocolParams,
    det: &DetectorModel,
) -> Result<RateCurvePoint, SkrError> {
    p.validate()?;
    det.validate()?;
    if !(distance_km.is_finite() && distance_km >= 0.0) {
        return Err(ParamError::new("distance_km", "must be finite and >= 0").into());
    }
    if !(f_rep.is_finite() && f_rep > 0.0) {
        return Err(ParamError::new("f_rep", "must be finite and > 0").into());
    }
    let ints = p.intensities();
    let mu = ints.map(|x| x.0);
    let probs = ints.map(|x| x.1);
    if !(mu[1] > mu[2] && mu[0] > mu[1] + mu[2]) {
        return Err(SkrError::DegenerateIntensities(mu));
    }
    let eta = transmittance(distance_km, p.alpha_db_per_km, det);
    let obs = mu.map(|m| gain_and_qber(m, eta, p.e_d, det.dark_count_prob));
    let q = obs.map(|x| x.0);
    let e = obs.map(|x| x.1);
    let (q_s, e_s) = gain_and_qber(p.u_s, eta, p.e_d, det.dark_count_prob);
    let (q_d, e_d_obs) = gain_and_qber(p.u_d, eta, p.e_d, det.dark_count_prob);

    // Block closes once n_z sifted Z detections are collected.
    let q_avg: f64 = (0..3).map(|k| probs[k] * q[k]).sum();
    let pz2 = p.p_z * p.p_z;
    let px2 = (1.0 - p.p_z).powi(2);
    let block_pulses = p.n_z / (pz2 * q_avg);

    let z = finite_bounds(mu, probs, q, e, block_pulses * pz2, p.eps_sec);
    let x = finite_bounds(mu, probs, q, e, block_pulses * px2, p.eps_sec);
    let tau1: f64 = (0..3).map(|k| probs[k] * (-mu[k]).exp() * mu[k]).sum();

    let zero = |y1: f64| RateCurvePoint {
        distance_km,
        transmittance: eta,
        q_s,
        e_s,
        q_d,
        e_d_obs,
        y1_lower: y1,
        e1_upper: 0.5,
        secret_fraction: 0.0,
        block_pulses,
        skr_bps: 0.0,
    };
    if z.s1 <= 0.0 || x.s1 <= 0.0 {
        return Ok(zero(0.0));
    }
    let y1_lower = z.s1 / (block_pulses * pz2 * tau1);
    let ratio = (x.v1 / x.s1).min(0.5);
    let phase_err = (ratio + sampling_gamma(p.eps_sec, ratio, z.s1, x.s1)).min(0.5);
    let e_z = z.errors / z.detections;
    let leak = p.f_ec * z.detections * h(e_z);
    let key = z.s0 + z.s1 * (1.0 - h(phase_err))
        - leak
        - 6.0 * (21.0 / p.eps_sec).log2()
        - (2.0 / p.eps_cor).log2();
    let secret_fraction = key.max(0.0) / block_pulses;
    Ok(RateCurvePoint {
        distance_km,
        transmittance: eta,
        q_s,
        e_s,
        q_d,
        e_d_obs,
        y1_lower,
        e1_upper: phase_err,
        secret_fraction,
        block_pulses,
        skr_bps: f_rep * secret_fraction,
    })
}

/// Secret key rate in bits/s.
pub fn secure_key_rate(
    distance_km: f64,
    f_rep: f64,
    p: &ProtocolParams,
    det: &DetectorModel,
) -> Result<f64, SkrError> {
    Ok(rate_point(distance_km, f_rep, p, det)?.skr_bps)
}

/// Rate curve over a distance grid, evaluated in parallel, returned in
/// grid order.
pub fn rate_curve(
    distances_km: &[f64],
    f_rep: f64,
    p: &ProtocolParams,
    det: &DetectorModel,
) -> Result<Vec<RateCurvePoint>, SkrError> {
    distances_km
        .par_iter()
        .map(|&d| rate_point(d, f_rep, p, det))
        .collect()
}

/// Largest grid distance with a positive rate.
pub fn cutoff_distance(curve: &[RateCurvePoint]) -> Option<f64> {
    curve
        .iter()
        .filter(|pt| pt.skr_bps > 0.0)
        .map(|pt| pt.distance_km)
        .reduce(f64::max)
}
