use std::f64::consts::PI;

use super::spectrum::rabi_profile;
use super::{ControlDrive, EitSettings, IndexConvention, Medium, SlowLightResult, WaveguideSpec};
use crate::{Error, Result};

/// Group velocity at two-photon resonance, averaged over the guide by transit
/// time, and the resulting compression of a pulse of FWHM `pulse_width`.
///
/// Locally `v_g = c0 / (n + nu0 dn/dnu)` with `dn/dnu` from a central
/// difference of step `fd_step_hz`; a second difference at twice the step
/// guards against a step that is too coarse for the window.
pub fn group_velocity_on_resonance(
    wg: &WaveguideSpec,
    drive: &ControlDrive,
    medium: &Medium,
    settings: &EitSettings,
    pulse_width: f64,
) -> Result<SlowLightResult> {
    wg.validate()?;
    settings.validate()?;
    if !(pulse_width.is_finite() && pulse_width > 0.0) {
        return Err(Error::domain("pulse_width", pulse_width, "> 0 s"));
    }
    let resp = medium.response();
    let c0 = medium.constants.c0;
    let nu0 = medium.system.nu0;
    let h = settings.fd_step_hz;
    let index_weight = match settings.index_convention {
        IndexConvention::Linear => 1.0,
        IndexConvention::Dilute => 0.5,
    };
    let re_chi = |nu: f64, omega: f64| {
        resp.doppler_averaged(2.0 * PI * nu, omega, settings.doppler_model)
            .re
    };

    let mut transit = 0.0;
    for (omega, w) in rabi_profile(drive, wg, settings, settings.z_panels) {
        let n = 1.0 + index_weight * re_chi(0.0, omega);
        let slope = index_weight * (re_chi(h, omega) - re_chi(-h, omega)) / (2.0 * h);
        let coarse = index_weight * (re_chi(2.0 * h, omega) - re_chi(-2.0 * h, omega)) / (4.0 * h);
        let denom = n + nu0 * slope;
        if (coarse - slope).abs() > 1e-2 * slope.abs() + 1e-3 / nu0 {
            return Err(Error::Accuracy(format!(
                "dn/dnu step {h} Hz too coarse at Rabi frequency {omega:.4e} rad/s \
                 (slope {slope:.4e} vs {coarse:.4e} at twice the step)"
            )));
        }
        if !(denom > 0.0) || !denom.is_finite() {
            return Err(Error::ModelValidity(format!(
                "group index n + nu0 dn/dnu = {denom:.4e} at Rabi frequency {omega:.4e} rad/s"
            )));
        }
        transit += w * denom / c0;
    }
    let group_velocity = wg.length / transit;
    let compressed_length = pulse_width * group_velocity;
    Ok(SlowLightResult {
        group_velocity,
        compression_factor: c0 / group_velocity,
        compressed_length,
        captured_fraction: (wg.cell_length / compressed_length).min(1.0),
        pulse_width,
    })
}
