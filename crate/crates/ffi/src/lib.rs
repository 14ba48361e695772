//! C ABI over `vapor_memory_lab`.
//!
//! Every function returns a [`VmlStatus`]; on failure the message is kept per
//! thread and read back with [`vml_last_error_message`]. Handles are opaque
//! and owned by the caller, who releases them with the matching `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use vapor_memory_lab::atomic::larmor_angular_frequency;
use vapor_memory_lab::config::ExperimentConfig;
use vapor_memory_lab::eit::{group_velocity_on_resonance, transmission_spectrum, ControlDrive, Spectrum};
use vapor_memory_lab::estimation::fit_lifetime;
use vapor_memory_lab::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VmlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numeric = 4,
    NonConvergence = 5,
    Io = 6,
    Panic = 7,
}

impl From<&Error> for VmlStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse { .. } => VmlStatus::Config,
            Error::InvalidParameter(_) | Error::Domain { .. } => VmlStatus::InvalidArgument,
            Error::NonConvergence(_) => VmlStatus::NonConvergence,
            Error::Io(_) | Error::Json(_) => VmlStatus::Io,
            _ => VmlStatus::Numeric,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: VmlStatus, message: impl Into<String>) -> VmlStatus {
    set_last_error(message.into());
    status
}

/// Run `f`, mapping errors and panics to status codes.
fn guard<F>(f: F) -> VmlStatus
where
    F: FnOnce() -> Result<(), VmlFailure>,
{
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VmlStatus::Ok,
        Ok(Err(VmlFailure(status, msg))) => fail(status, msg),
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(VmlStatus::Panic, msg)
        }
    }
}

struct VmlFailure(VmlStatus, String);

impl From<Error> for VmlFailure {
    fn from(e: Error) -> Self {
        VmlFailure((&e).into(), e.to_string())
    }
}

fn null(what: &str) -> VmlFailure {
    VmlFailure(VmlStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> VmlFailure {
    VmlFailure(VmlStatus::InvalidArgument, msg.into())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn vml_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vml_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Opaque experiment configuration.
pub struct VmlConfig {
    inner: ExperimentConfig,
}

/// Opaque transmission spectrum.
pub struct VmlSpectrum {
    inner: Spectrum,
}

/// Configuration with every default.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vml_config_default(out: *mut *mut VmlConfig) -> VmlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let b = Box::new(VmlConfig {
            inner: ExperimentConfig::default(),
        });
        unsafe { *out = Box::into_raw(b) };
        Ok(())
    })
}

/// Parse and validate a TOML configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vml_config_from_toml(toml: *const c_char, out: *mut *mut VmlConfig) -> VmlStatus {
    guard(|| {
        if toml.is_null() {
            return Err(null("toml"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = unsafe { CStr::from_ptr(toml) }
            .to_str()
            .map_err(|e| VmlFailure(VmlStatus::Config, format!("config is not UTF-8: {e}")))?;
        let inner = ExperimentConfig::from_toml(text)?;
        inner.validate()?;
        unsafe { *out = Box::into_raw(Box::new(VmlConfig { inner })) };
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from a `vml_config_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn vml_config_free(cfg: *mut VmlConfig) {
    if !cfg.is_null() {
        drop(unsafe { Box::from_raw(cfg) });
    }
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn vml_config_set_seed(cfg: *mut VmlConfig, seed: u64) -> VmlStatus {
    guard(|| {
        let c = unsafe { cfg.as_mut() }.ok_or_else(|| null("cfg"))?;
        c.inner.seed = seed;
        Ok(())
    })
}

/// Hex SHA-256 of the resolved configuration (64 characters plus NUL, so
/// `buf_len` must be at least 65).
///
/// # Safety
/// `cfg` must be a live handle and `buf` writable for `buf_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn vml_config_hash(cfg: *const VmlConfig, buf: *mut c_char, buf_len: usize) -> VmlStatus {
    guard(|| {
        let c = unsafe { cfg.as_ref() }.ok_or_else(|| null("cfg"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let hash = c.inner.hash()?;
        if buf_len < hash.len() + 1 {
            return Err(invalid(format!("buffer of {buf_len} bytes, need {}", hash.len() + 1)));
        }
        unsafe {
            ptr::copy_nonoverlapping(hash.as_ptr().cast::<c_char>(), buf, hash.len());
            *buf.add(hash.len()) = 0;
        }
        Ok(())
    })
}

fn drive(cfg: &ExperimentConfig, power_w: f64) -> Result<ControlDrive, VmlFailure> {
    Ok(ControlDrive::from_power(power_w, cfg.drive.kappa()?)?)
}

/// Transmission spectrum over the configured grid at `power_w` (W).
///
/// # Safety
/// `cfg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vml_spectrum_compute(
    cfg: *const VmlConfig,
    power_w: f64,
    out: *mut *mut VmlSpectrum,
) -> VmlStatus {
    guard(|| {
        let c = &unsafe { cfg.as_ref() }.ok_or_else(|| null("cfg"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = transmission_spectrum(&c.waveguide, &drive(c, power_w)?, &c.medium()?, &c.grid.grid()?, &c.eit)?;
        unsafe { *out = Box::into_raw(Box::new(VmlSpectrum { inner: spec })) };
        Ok(())
    })
}

/// Number of grid points, or 0 for a null handle.
///
/// # Safety
/// `spec` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vml_spectrum_len(spec: *const VmlSpectrum) -> usize {
    unsafe { spec.as_ref() }.map_or(0, |s| s.inner.grid.len())
}

/// Copy detunings (Hz) and transmissions into caller arrays of length `len`,
/// which must equal [`vml_spectrum_len`].
///
/// # Safety
/// `spec` must be a live handle; both arrays writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn vml_spectrum_copy(
    spec: *const VmlSpectrum,
    detuning_hz: *mut f64,
    transmission: *mut f64,
    len: usize,
) -> VmlStatus {
    guard(|| {
        let s = &unsafe { spec.as_ref() }.ok_or_else(|| null("spec"))?.inner;
        if detuning_hz.is_null() || transmission.is_null() {
            return Err(null("output array"));
        }
        if len != s.grid.len() {
            return Err(invalid(format!("len {len} differs from spectrum length {}", s.grid.len())));
        }
        unsafe {
            ptr::copy_nonoverlapping(s.grid.values().as_ptr(), detuning_hz, len);
            ptr::copy_nonoverlapping(s.transmission.as_ptr(), transmission, len);
        }
        Ok(())
    })
}

/// # Safety
/// `spec` must come from [`vml_spectrum_compute`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn vml_spectrum_free(spec: *mut VmlSpectrum) {
    if !spec.is_null() {
        drop(unsafe { Box::from_raw(spec) });
    }
}

/// Slow-light figures at two-photon resonance.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VmlSlowLight {
    pub group_velocity_m_s: f64,
    pub compression_factor: f64,
    pub compressed_length_m: f64,
    pub captured_fraction: f64,
}

/// # Safety
/// `cfg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vml_slowlight(
    cfg: *const VmlConfig,
    power_w: f64,
    pulse_width_s: f64,
    out: *mut VmlSlowLight,
) -> VmlStatus {
    guard(|| {
        let c = &unsafe { cfg.as_ref() }.ok_or_else(|| null("cfg"))?.inner;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let r = group_velocity_on_resonance(&c.waveguide, &drive(c, power_w)?, &c.medium()?, &c.eit, pulse_width_s)?;
        *out = VmlSlowLight {
            group_velocity_m_s: r.group_velocity,
            compression_factor: r.compression_factor,
            compressed_length_m: r.compressed_length,
            captured_fraction: r.captured_fraction,
        };
        Ok(())
    })
}

/// Efficiency and timing extracted from one synthetic histogram.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VmlEfficiency {
    pub eta: f64,
    pub eta_uncertainty: f64,
    pub storage_time_s: f64,
    pub fractional_delay: f64,
    pub n_read: f64,
    pub n_leak: f64,
    /// Non-zero when the retrieved peak was not resolved.
    pub low_confidence: c_int,
}

/// One storage run at `set_storage_s` with the configured sequence.
///
/// # Safety
/// `cfg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vml_storage_run(
    cfg: *const VmlConfig,
    set_storage_s: f64,
    seed: u64,
    out: *mut VmlEfficiency,
) -> VmlStatus {
    guard(|| {
        let c = &unsafe { cfg.as_ref() }.ok_or_else(|| null("cfg"))?.inner;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let e = c.storage_setup().run(set_storage_s, seed)?.efficiency;
        *out = VmlEfficiency {
            eta: e.eta_int,
            eta_uncertainty: e.eta_uncertainty,
            storage_time_s: e.t_storage_measured,
            fractional_delay: e.fractional_delay,
            n_read: e.n_read,
            n_leak: e.n_leak,
            low_confidence: c_int::from(e.low_confidence),
        };
        Ok(())
    })
}

/// Damped-precession lifetime fit.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VmlLifetimeFit {
    pub t_mem_s: f64,
    /// Expanded uncertainty of `t_mem_s`.
    pub t_mem_uncertainty_s: f64,
    pub omega_rad_s: f64,
    pub phi_rad: f64,
    pub eta0: f64,
    pub converged: c_int,
}

/// Fit `eta(t)` with per-point uncertainties `sigma`, all of length `n`.
///
/// # Safety
/// The three arrays must be readable for `n` doubles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vml_lifetime_fit(
    t_s: *const f64,
    eta: *const f64,
    sigma: *const f64,
    n: usize,
    out: *mut VmlLifetimeFit,
) -> VmlStatus {
    guard(|| {
        if t_s.is_null() || eta.is_null() || sigma.is_null() {
            return Err(null("input array"));
        }
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let (t, y, s) = unsafe {
            (
                std::slice::from_raw_parts(t_s, n),
                std::slice::from_raw_parts(eta, n),
                std::slice::from_raw_parts(sigma, n),
            )
        };
        let fit = fit_lifetime(t, y, s, &Default::default())?;
        *out = VmlLifetimeFit {
            t_mem_s: fit.estimates[0],
            t_mem_uncertainty_s: fit.uncertainties[0],
            omega_rad_s: fit.estimates[1],
            phi_rad: fit.estimates[2],
            eta0: fit.estimates[3],
            converged: c_int::from(fit.converged),
        };
        Ok(())
    })
}

/// Larmor precession frequency (Hz) in a field of `b_tesla`.
///
/// # Safety
/// `out_hz` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vml_larmor_frequency_hz(b_tesla: f64, out_hz: *mut f64) -> VmlStatus {
    guard(|| {
        let out = unsafe { out_hz.as_mut() }.ok_or_else(|| null("out_hz"))?;
        let k = Default::default();
        *out = larmor_angular_frequency(b_tesla, &k)? / (2.0 * std::f64::consts::PI);
        Ok(())
    })
}
