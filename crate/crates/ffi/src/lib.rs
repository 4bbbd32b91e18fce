//! C ABI over `polmod`.
//!
//! Every function returns a [`PolmodStatus`] and writes results through out
//! pointers. On failure a message is stored per thread and can be copied out
//! with [`polmod_last_error_message`]. Panics never cross the boundary.
//! Handles are created with `*_new` and released with `*_free`; a handle
//! may be shared between threads for reading.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use polmod::drive::{f_max_previous_scheme, DriveKind, DriveWaveform, PulseProfile, PulseShape};
use polmod::encoder::{
    equivalent_v_pi, per_of_state, reverse_residual, EncoderConfig, EncoderError,
};
use polmod::modulator::{v_pi_reverse, ModulatorError, ModulatorParams, ReverseVpi};
use polmod::polarization::{error_from_per, iqber, per_from_error, CountRecord, PolarizationError};
use polmod::skr::{
    binary_entropy, rate_point, DetectorModel, ProtocolParams, RateCurvePoint, SkrError,
};
use polmod::ParamError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolmodStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DomainError = 3,
    /// The reverse half-wave voltage is unbounded at this frequency.
    Divergent = 4,
    ComputationError = 5,
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

struct Failure(PolmodStatus, String);

impl From<ParamError> for Failure {
    fn from(e: ParamError) -> Self {
        Failure(PolmodStatus::InvalidArgument, e.to_string())
    }
}

impl From<PolarizationError> for Failure {
    fn from(e: PolarizationError) -> Self {
        Failure(PolmodStatus::DomainError, e.to_string())
    }
}

impl From<ModulatorError> for Failure {
    fn from(e: ModulatorError) -> Self {
        let status = match e {
            ModulatorError::Param(_) | ModulatorError::BadFrequency(_) => {
                PolmodStatus::InvalidArgument
            }
            _ => PolmodStatus::ComputationError,
        };
        Failure(status, e.to_string())
    }
}

impl From<EncoderError> for Failure {
    fn from(e: EncoderError) -> Self {
        match e {
            EncoderError::Param(p) => p.into(),
            EncoderError::Polarization(p) => p.into(),
            EncoderError::Modulator(m) => m.into(),
            other => Failure(PolmodStatus::InvalidArgument, other.to_string()),
        }
    }
}

impl From<SkrError> for Failure {
    fn from(e: SkrError) -> Self {
        let status = match e {
            SkrError::EntropyDomain(_) => PolmodStatus::DomainError,
            _ => PolmodStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> PolmodStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PolmodStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            PolmodStatus::Panic
        }
    }
}

fn out<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    // SAFETY: the caller passes either null or a valid, aligned, writable pointer.
    unsafe { p.as_mut() }
        .ok_or_else(|| Failure(PolmodStatus::NullPointer, "output pointer is null".into()))
}

fn input<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    // SAFETY: the caller passes either null or a valid, aligned pointer.
    unsafe { p.as_ref() }
        .ok_or_else(|| Failure(PolmodStatus::NullPointer, "input pointer is null".into()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn polmod_version() -> *const c_char {
    static V: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(s) => s,
            Err(_) => panic!("version string"),
        };
    V.as_ptr()
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length
/// excluding the terminator; `buf` may be null to query the length.
///
/// # Safety
/// `buf` must be null or point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn polmod_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            // SAFETY: guaranteed by the caller for `len` bytes.
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// `10·log10((1−e)/e)`.
///
/// # Safety
/// `out_db` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn polmod_per_from_error(e: f64, out_db: *mut f64) -> PolmodStatus {
    guard(|| {
        *out(out_db)? = per_from_error(e)?;
        Ok(())
    })
}

/// Inverse of [`polmod_per_from_error`].
///
/// # Safety
/// `out_e` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn polmod_error_from_per(per_db: f64, out_e: *mut f64) -> PolmodStatus {
    guard(|| {
        *out(out_e)? = error_from_per(per_db)?;
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PolmodCounts {
    pub c_a: u64,
    pub d_a: u64,
    pub c_b_perp: u64,
    pub d_b_perp: u64,
}

/// Intrinsic QBER from dark-count-corrected counts.
///
/// # Safety
/// `out_iqber` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn polmod_iqber(counts: PolmodCounts, out_iqber: *mut f64) -> PolmodStatus {
    guard(|| {
        *out(out_iqber)? = iqber(&CountRecord {
            c_a: counts.c_a,
            d_a: counts.d_a,
            c_b_perp: counts.c_b_perp,
            d_b_perp: counts.d_b_perp,
        })?;
        Ok(())
    })
}

/// # Safety
/// `out_h` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn polmod_binary_entropy(x: f64, out_h: *mut f64) -> PolmodStatus {
    guard(|| {
        *out(out_h)? = binary_entropy(x)?;
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PolmodModulatorParams {
    pub v_pi_f: f64,
    pub tau_d: f64,
    pub length_l: f64,
    pub n0: f64,
}

impl From<ModulatorParams> for PolmodModulatorParams {
    fn from(p: ModulatorParams) -> Self {
        PolmodModulatorParams {
            v_pi_f: p.v_pi_f,
            tau_d: p.tau_d,
            length_l: p.length_l,
            n0: p.n0,
        }
    }
}

impl PolmodModulatorParams {
    fn to_core(self) -> Result<ModulatorParams, Failure> {
        Ok(ModulatorParams::new(
            self.v_pi_f,
            self.tau_d,
            self.length_l,
            self.n0,
        )?)
    }
}

/// # Safety
/// `out_params` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn polmod_modulator_default(
    out_params: *mut PolmodModulatorParams,
) -> PolmodStatus {
    guard(|| {
        *out(out_params)? = ModulatorParams::default().into();
        Ok(())
    })
}

/// Reverse half-wave voltage at `frequency_hz`. Returns
/// `POLMOD_STATUS_DIVERGENT` (leaving `out_v` untouched) when the response
/// is unbounded.
///
/// # Safety
/// `params` must be null or valid for reads, `out_v` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn polmod_v_pi_reverse(
    frequency_hz: f64,
    params: *const PolmodModulatorParams,
    out_v: *mut f64,
) -> PolmodStatus {
    guard(|| {
        let p = input(params)?.to_core()?;
        let slot = out(out_v)?;
        match v_pi_reverse(frequency_hz, &p)? {
            ReverseVpi::Finite(v) => {
                *slot = v;
                Ok(())
            }
            ReverseVpi::Divergent => Err(Failure(
                PolmodStatus::Divergent,
                format!("reverse half-wave voltage diverges at {frequency_hz} Hz"),
            )),
        }
    })
}

/// Repetition-rate bound of a square-driven Sagnac encoder.
///
/// # Safety
/// `out_hz` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn polmod_f_max_previous_scheme(
    t0: f64,
    te: f64,
    l: f64,
    n0: f64,
    out_hz: *mut f64,
) -> PolmodStatus {
    guard(|| {
        *out(out_hz)? = f_max_previous_scheme(t0, te, l, n0)
            .map_err(|e| Failure(PolmodStatus::DomainError, e.to_string()))?;
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolmodDriveKind {
    Sine = 0,
    Square = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolmodPulseProfile {
    Gaussian = 0,
    Sech2 = 1,
}

/// Flat encoder description. `pulse_fwhm_s == 0` selects a zero-width pulse.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PolmodEncoderParams {
    pub modulator: PolmodModulatorParams,
    pub drive_kind: PolmodDriveKind,
    pub drive_frequency_hz: f64,
    pub drive_phase_offset_rad: f64,
    pub drive_delay_s: f64,
    pub square_duration_s: f64,
    pub pulse_fwhm_s: f64,
    pub pulse_rep_rate_hz: f64,
    pub pulse_profile: PolmodPulseProfile,
    pub baseline_per_db: f64,
    pub rf_transfer_efficiency: f64,
    pub include_reverse_residual: bool,
}

impl PolmodEncoderParams {
    fn to_core(self) -> Result<EncoderConfig, Failure> {
        let drive = DriveWaveform {
            kind: match self.drive_kind {
                PolmodDriveKind::Sine => DriveKind::Sine,
                PolmodDriveKind::Square => DriveKind::Square,
            },
            amplitude_v0: 0.0,
            frequency_fd: self.drive_frequency_hz,
            phase_offset: self.drive_phase_offset_rad,
            delay: self.drive_delay_s,
            square_duration_te: self.square_duration_s,
        };
        let pulse = if self.pulse_fwhm_s == 0.0 {
            None
        } else {
            let profile = match self.pulse_profile {
                PolmodPulseProfile::Gaussian => PulseProfile::Gaussian,
                PolmodPulseProfile::Sech2 => PulseProfile::Sech2,
            };
            Some(
                PulseShape::new(self.pulse_fwhm_s, self.pulse_rep_rate_hz, profile)
                    .map_err(|e| e.within("pulse"))?,
            )
        };
        let cfg = EncoderConfig {
            modulator: self
                .modulator
                .to_core()
                .map_err(|Failure(s, m)| Failure(s, format!("modulator: {m}")))?,
            drive,
            pulse,
            baseline_per_db: self.baseline_per_db,
            rf_transfer_efficiency: self.rf_transfer_efficiency,
            include_reverse_residual: self.include_reverse_residual,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<EncoderConfig> for PolmodEncoderParams {
    fn from(c: EncoderConfig) -> Self {
        PolmodEncoderParams {
            modulator: c.modulator.into(),
            drive_kind: match c.drive.kind {
                DriveKind::Sine => PolmodDriveKind::Sine,
                DriveKind::Square => PolmodDriveKind::Square,
            },
            drive_frequency_hz: c.drive.frequency_fd,
            drive_phase_offset_rad: c.drive.phase_offset,
            drive_delay_s: c.drive.delay,
            square_duration_s: c.drive.square_duration_te,
            pulse_fwhm_s: c.pulse.map_or(0.0, |p| p.fwhm_t0),
            pulse_rep_rate_hz: c.pulse.map_or(c.drive.frequency_fd, |p| p.rep_rate),
            pulse_profile: match c.pulse.map(|p| p.profile) {
                Some(PulseProfile::Sech2) => PolmodPulseProfile::Sech2,
                _ => PolmodPulseProfile::Gaussian,
            },
            baseline_per_db: c.baseline_per_db,
            rf_transfer_efficiency: c.rf_transfer_efficiency,
            include_reverse_residual: c.include_reverse_residual,
        }
    }
}

/// Opaque encoder handle.
pub struct PolmodEncoder {
    cfg: EncoderConfig,
}

/// Fills `out_params` with the default 10 GHz sine / 2.16 ps configuration.
///
/// # Safety
/// `out_params` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn polmod_encoder_params_default(
    out_params: *mut PolmodEncoderParams,
) -> PolmodStatus {
    guard(|| {
        *out(out_params)? = EncoderConfig::default().into();
        Ok(())
    })
}

/// # Safety
/// `params` must be null or valid for reads; `out_handle` null or valid for
/// writes. The handle must be released with [`polmod_encoder_free`].
#[no_mangle]
pub unsafe extern "C" fn polmod_encoder_new(
    params: *const PolmodEncoderParams,
    out_handle: *mut *mut PolmodEncoder,
) -> PolmodStatus {
    guard(|| {
        let slot = out(out_handle)?;
        let cfg = input(params)?.to_core()?;
        *slot = Box::into_raw(Box::new(PolmodEncoder { cfg }));
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or a pointer from [`polmod_encoder_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn polmod_encoder_free(handle: *mut PolmodEncoder) {
    if !handle.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(handle) });
    }
}

/// Replaces the pulse width so that the duty cycle against the drive equals
/// `duty` (0 gives a zero-width pulse).
///
/// # Safety
/// `handle` must be null or a live encoder handle not used concurrently.
#[no_mangle]
pub unsafe extern "C" fn polmod_encoder_set_duty(
    handle: *mut PolmodEncoder,
    duty: f64,
) -> PolmodStatus {
    guard(|| {
        let enc = out(handle)?;
        enc.cfg = enc.cfg.with_duty(duty)?;
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PolmodPerPoint {
    pub per_db: f64,
    pub qber: f64,
}

/// PER and QBER of the state prepared for `target_phase_rad` with the pulse
/// displaced by `delay_s` from the drive peak.
///
/// # Safety
/// `handle` must be null or a live encoder handle; `out_point` null or
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn polmod_encoder_per(
    handle: *const PolmodEncoder,
    target_phase_rad: f64,
    delay_s: f64,
    out_point: *mut PolmodPerPoint,
) -> PolmodStatus {
    guard(|| {
        let enc = input(handle)?;
        let slot = out(out_point)?;
        let p = per_of_state(&enc.cfg, target_phase_rad, delay_s)?;
        *slot = PolmodPerPoint {
            per_db: p.per_db,
            qber: p.qber,
        };
        Ok(())
    })
}

/// # Safety
/// As [`polmod_encoder_per`].
#[no_mangle]
pub unsafe extern "C" fn polmod_encoder_equivalent_v_pi(
    handle: *const PolmodEncoder,
    out_v: *mut f64,
) -> PolmodStatus {
    guard(|| {
        let enc = input(handle)?;
        *out(out_v)? = equivalent_v_pi(&enc.cfg)?;
        Ok(())
    })
}

/// Worst-case counter-propagating phase for a drive of amplitude
/// `amplitude_v`.
///
/// # Safety
/// As [`polmod_encoder_per`].
#[no_mangle]
pub unsafe extern "C" fn polmod_encoder_reverse_residual(
    handle: *const PolmodEncoder,
    amplitude_v: f64,
    out_rad: *mut f64,
) -> PolmodStatus {
    guard(|| {
        let enc = input(handle)?;
        let slot = out(out_rad)?;
        if !(amplitude_v.is_finite() && amplitude_v >= 0.0) {
            return Err(Failure(
                PolmodStatus::InvalidArgument,
                "amplitude_v must be finite and >= 0".into(),
            ));
        }
        let mut cfg = enc.cfg;
        cfg.drive = cfg.drive.with_amplitude(amplitude_v);
        *slot = reverse_residual(&cfg)?;
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PolmodProtocolParams {
    pub p_d: f64,
    pub p_s: f64,
    pub p_z: f64,
    pub n_z: f64,
    pub u_d: f64,
    pub u_s: f64,
    pub u_v: f64,
    pub e_d: f64,
    pub f_ec: f64,
    pub eps_sec: f64,
    pub eps_cor: f64,
    pub alpha_db_per_km: f64,
}

impl From<ProtocolParams> for PolmodProtocolParams {
    fn from(p: ProtocolParams) -> Self {
        PolmodProtocolParams {
            p_d: p.p_d,
            p_s: p.p_s,
            p_z: p.p_z,
            n_z: p.n_z,
            u_d: p.u_d,
            u_s: p.u_s,
            u_v: p.u_v,
            e_d: p.e_d,
            f_ec: p.f_ec,
            eps_sec: p.eps_sec,
            eps_cor: p.eps_cor,
            alpha_db_per_km: p.alpha_db_per_km,
        }
    }
}

impl From<PolmodProtocolParams> for ProtocolParams {
    fn from(p: PolmodProtocolParams) -> Self {
        ProtocolParams {
            p_d: p.p_d,
            p_s: p.p_s,
            p_z: p.p_z,
            n_z: p.n_z,
            u_d: p.u_d,
            u_s: p.u_s,
            u_v: p.u_v,
            e_d: p.e_d,
            f_ec: p.f_ec,
            eps_sec: p.eps_sec,
            eps_cor: p.eps_cor,
            alpha_db_per_km: p.alpha_db_per_km,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PolmodDetectorModel {
    pub efficiency: f64,
    pub dark_count_prob: f64,
}

/// Default protocol and detector parameters. With `table1_literal` the
/// weakest intensity is 0.35 instead of 0.
///
/// # Safety
/// Each pointer must be null or valid for writes; null pointers are skipped.
#[no_mangle]
pub unsafe extern "C" fn polmod_rate_defaults(
    table1_literal: bool,
    out_protocol: *mut PolmodProtocolParams,
    out_detector: *mut PolmodDetectorModel,
) -> PolmodStatus {
    guard(|| {
        let p = if table1_literal {
            ProtocolParams::table1_literal()
        } else {
            ProtocolParams::default()
        };
        let d = DetectorModel::default();
        // SAFETY: null or valid, per the contract above.
        if let Some(slot) = unsafe { out_protocol.as_mut() } {
            *slot = p.into();
        }
        // SAFETY: as above.
        if let Some(slot) = unsafe { out_detector.as_mut() } {
            *slot = PolmodDetectorModel {
                efficiency: d.efficiency,
                dark_count_prob: d.dark_count_prob,
            };
        }
        Ok(())
    })
}

/// Opaque key-rate model handle.
pub struct PolmodRateModel {
    protocol: ProtocolParams,
    detector: DetectorModel,
}

/// # Safety
/// `protocol` and `detector` must be null or valid for reads; `out_handle`
/// null or valid for writes. Release with [`polmod_rate_model_free`].
#[no_mangle]
pub unsafe extern "C" fn polmod_rate_model_new(
    protocol: *const PolmodProtocolParams,
    detector: *const PolmodDetectorModel,
    out_handle: *mut *mut PolmodRateModel,
) -> PolmodStatus {
    guard(|| {
        let slot = out(out_handle)?;
        let protocol: ProtocolParams = (*input(protocol)?).into();
        let d = input(detector)?;
        let detector = DetectorModel {
            efficiency: d.efficiency,
            dark_count_prob: d.dark_count_prob,
        };
        protocol.validate().map_err(|e| e.within("protocol"))?;
        detector.validate().map_err(|e| e.within("detector"))?;
        *slot = Box::into_raw(Box::new(PolmodRateModel { protocol, detector }));
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or a pointer from [`polmod_rate_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn polmod_rate_model_free(handle: *mut PolmodRateModel) {
    if !handle.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(handle) });
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PolmodRatePoint {
    pub distance_km: f64,
    pub transmittance: f64,
    pub q_s: f64,
    pub e_s: f64,
    pub q_d: f64,
    pub e_d_obs: f64,
    pub y1_lower: f64,
    pub e1_upper: f64,
    pub skr_bps: f64,
}

impl From<RateCurvePoint> for PolmodRatePoint {
    fn from(p: RateCurvePoint) -> Self {
        PolmodRatePoint {
            distance_km: p.distance_km,
            transmittance: p.transmittance,
            q_s: p.q_s,
            e_s: p.e_s,
            q_d: p.q_d,
            e_d_obs: p.e_d_obs,
            y1_lower: p.y1_lower,
            e1_upper: p.e1_upper,
            skr_bps: p.skr_bps,
        }
    }
}

/// Key rate at one distance and clock rate.
///
/// # Safety
/// `handle` must be null or a live rate-model handle; `out_point` null or
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn polmod_rate_model_point(
    handle: *const PolmodRateModel,
    distance_km: f64,
    rep_rate_hz: f64,
    out_point: *mut PolmodRatePoint,
) -> PolmodStatus {
    guard(|| {
        let m = input(handle)?;
        let slot = out(out_point)?;
        *slot = rate_point(distance_km, rep_rate_hz, &m.protocol, &m.detector)?.into();
        Ok(())
    })
}

/// Key-rate curve over `n` distances, written to `out_points[0..n]`.
///
/// # Safety
/// `distances_km` must be valid for `n` reads and `out_points` for `n`
/// writes (either may be null only when `n == 0`).
#[no_mangle]
pub unsafe extern "C" fn polmod_rate_model_curve(
    handle: *const PolmodRateModel,
    distances_km: *const f64,
    n: usize,
    rep_rate_hz: f64,
    out_points: *mut PolmodRatePoint,
) -> PolmodStatus {
    guard(|| {
        let m = input(handle)?;
        if n == 0 {
            return Ok(());
        }
        if distances_km.is_null() || out_points.is_null() {
            return Err(Failure(
                PolmodStatus::NullPointer,
                "array pointer is null".into(),
            ));
        }
        // SAFETY: lengths guaranteed by the caller.
        let (d, o) = unsafe {
            (
                std::slice::from_raw_parts(distances_km, n),
                std::slice::from_raw_parts_mut(out_points, n),
            )
        };
        let curve = polmod::skr::rate_curve(d, rep_rate_hz, &m.protocol, &m.detector)?;
        for (slot, p) in o.iter_mut().zip(curve) {
            *slot = p.into();
        }
        Ok(())
    })
}
