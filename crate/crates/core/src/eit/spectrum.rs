use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{
    ControlDrive, DetuningGrid, EitSettings, LambdaResponse, Medium, Spectrum, WaveguideSpec,
};
use crate::quadrature::GaussLegendre;
use crate::{Error, Result};

/// Control Rabi frequency at depth `z` (m) into the waveguide.
pub fn rabi_at(drive: &ControlDrive, wg: &WaveguideSpec, z: f64) -> Result<f64> {
    if !(0.0..=wg.length).contains(&z) {
        return Err(Error::domain("z", z, format!("[0, {}] m", wg.length)));
    }
    Ok(attenuated(drive.omega0, wg.attenuation_db_per_m(), z))
}

fn attenuated(omega0: f64, db_per_m: f64, z: f64) -> f64 {
    omega0 * 10f64.powf(-db_per_m * z / 20.0)
}

/// z-quadrature points along the guide with the Rabi frequency at each node.
pub(crate) fn rabi_profile(
    drive: &ControlDrive,
    wg: &WaveguideSpec,
    settings: &EitSettings,
    panels: usize,
) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(settings.z_order);
    rule.composite_points(0.0, wg.length, panels)
        .into_iter()
        .map(|(z, w)| (attenuated(drive.omega0, wg.attenuation_db_per_m(), z), w))
        .collect()
}

/// `int_0^L chi~(delta, z) dz` (m) at angular signal detuning `delta`.
pub(crate) fn path_chi(
    resp: &LambdaResponse,
    delta: f64,
    profile: &[(f64, f64)],
    settings: &EitSettings,
) -> Complex64 {
    profile
        .iter()
        .map(|&(omega, w)| w * resp.doppler_averaged(delta, omega, settings.doppler_model))
        .sum()
}

fn spectrum_with_panels(
    wg: &WaveguideSpec,
    drive: &ControlDrive,
    medium: &Medium,
    grid: &DetuningGrid,
    settings: &EitSettings,
    panels: usize,
) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let resp = medium.response();
    let profile = rabi_profile(drive, wg, settings, panels);
    let scale = medium.od_per_chi_length();
    let chi: Vec<Complex64> = grid
        .values()
        .par_iter()
        .map(|&nu| path_chi(&resp, 2.0 * PI * nu, &profile, settings))
        .collect();
    let mut t = Vec::with_capacity(chi.len());
    for (c, nu) in chi.iter().zip(grid.values()) {
        let tr = (-scale * c.im).exp();
        if !tr.is_finite() || !c.re.is_finite() {
            return Err(Error::NonFinite(format!("transmission at detuning {nu} Hz")));
        }
        t.push(tr);
    }
    Ok((t, chi))
}

/// Transmission `T = exp(-(4 pi nu0 / c0) Im int_0^L chi~ dz)` over `grid`.
///
/// The z-integral uses composite Gauss-Legendre quadrature; with
/// `check_convergence` the spectrum is recomputed on twice as many panels and
/// an accuracy error is raised if any transmission moves by more than
/// `z_tolerance`.
pub fn transmission_spectrum(
    wg: &WaveguideSpec,
    drive: &ControlDrive,
    medium: &Medium,
    grid: &DetuningGrid,
    settings: &EitSettings,
) -> Result<Spectrum> {
    wg.validate()?;
    settings.validate()?;
    ControlDrive::from_rabi(drive.omega0)?;
    let (t, chi) = spectrum_with_panels(wg, drive, medium, grid, settings, settings.z_panels)?;
    if settings.check_convergence {
        let (t2, _) = spectrum_with_panels(wg, drive, medium, grid, settings, 2 * settings.z_panels)?;
        let (worst, at) = t
            .iter()
            .zip(&t2)
            .zip(grid.values())
            .map(|((a, b), nu)| ((a - b).abs(), *nu))
            .fold((0.0, 0.0), |acc, x| if x.0 > acc.0 { x } else { acc });
        if worst > settings.z_tolerance {
            return Err(Error::Accuracy(format!(
                "z quadrature not converged: doubling nodes moves T by {worst:.3e} at {at} Hz"
            )));
        }
    }
    let mut spec = Spectrum::new(grid.clone(), t)?;
    spec.chi_re = Some(chi.iter().map(|c| c.re).collect());
    spec.chi_im = Some(chi.iter().map(|c| c.im).collect());
    Ok(spec)
}

/// Reduction in optical depth at zero detuning, `ln T_on(0) - ln T_off(0)`.
pub fn od_eit(with_control: &Spectrum, without_control: &Spectrum) -> Result<f64> {
    if with_control.grid != without_control.grid {
        return Err(Error::InvalidParameter(
            "OD_EIT needs both spectra on the same detuning grid".into(),
        ));
    }
    let on = with_control.on_resonance()?;
    let off = without_control.on_resonance()?;
    for t in [on, off] {
        if !(t > 0.0) {
            return Err(Error::domain("transmission", t, "> 0 for a logarithm"));
        }
    }
    Ok(on.ln() - off.ln())
}

/// Full width of the transparency peak around zero detuning (Hz).
///
/// Half-contrast convention: on each side the half level lies midway between
/// the peak transmission and that side's flanking minimum, and the crossing
/// is located by linear interpolation between grid nodes.
pub fn eit_window_fwhm(spec: &Spectrum) -> Result<f64> {
    let t = &spec.transmission;
    let x = spec.grid.values();
    let n = t.len();
    let mut peak = spec.grid.zero_index()?;
    // climb to the local maximum nearest zero detuning
    loop {
        if peak + 1 < n && t[peak + 1] > t[peak] {
            peak += 1;
        } else if peak > 0 && t[peak - 1] > t[peak] {
            peak -= 1;
        } else {
            break;
        }
    }
    let mut left_min = peak;
    while left_min > 0 && t[left_min - 1] <= t[left_min] {
        left_min -= 1;
    }
    let mut right_min = peak;
    while right_min + 1 < n && t[right_min + 1] <= t[right_min] {
        right_min += 1;
    }
    let top = t[peak];
    let resolvable = |m: usize| m != peak && top - t[m] > 1e-9 * top.max(1e-300);
    if !resolvable(left_min) || !resolvable(right_min) {
        return Err(Error::NotFound(
            "no resolvable transparency peak at zero detuning".into(),
        ));
    }
    let crossing = |from: usize, to: usize| -> f64 {
        let half = 0.5 * (top + t[to]);
        let step: isize = if to < from { -1 } else { 1 };
        let mut i = from;
        loop {
            let j = (i as isize + step) as usize;
            if t[j] <= half {
                let f = (t[i] - half) / (t[i] - t[j]);
                return x[i] + f * (x[j] - x[i]);
            }
            i = j;
        }
    };
    Ok(crossing(peak, right_min) - crossing(peak, left_min))
}

/// `(power, kappa sqrt(power))` for each power.
pub fn rabi_vs_power_curve(powers: &[f64], kappa: f64) -> Result<Vec<(f64, f64)>> {
    powers
        .iter()
        .map(|&p| ControlDrive::from_power(p, kappa).map(|d| (p, d.omega0)))
        .collect()
}

/// `kappa` such that `kappa sqrt(power) = omega0`.
pub fn calibrate_kappa(power: f64, omega0: f64) -> Result<f64> {
    if !(power.is_finite() && power > 0.0) {
        return Err(Error::domain("anchor power", power, "> 0 W"));
    }
    if !(omega0.is_finite() && omega0 >= 0.0) {
        return Err(Error::domain("anchor omega0", omega0, ">= 0 rad/s"));
    }
    Ok(omega0 / power.sqrt())
}

/// Density scale at which the simulated OD_EIT equals `target`.
///
/// OD_EIT is linear in the density scale, so one evaluation at the medium's
/// own scale fixes it.
pub fn calibrate_density_scale(
    target: f64,
    wg: &WaveguideSpec,
    drive: &ControlDrive,
    medium: &Medium,
    settings: &EitSettings,
) -> Result<f64> {
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::domain("target OD_EIT", target, "> 0"));
    }
    wg.validate()?;
    settings.validate()?;
    let resp = medium.response();
    let on = rabi_profile(drive, wg, settings, settings.z_panels);
    let off = rabi_profile(&ControlDrive::from_rabi(0.0)?, wg, settings, settings.z_panels);
    let od = medium.od_per_chi_length()
        * (path_chi(&resp, 0.0, &off, settings).im - path_chi(&resp, 0.0, &on, settings).im);
    if !(od > 0.0) {
        return Err(Error::ModelValidity(format!(
            "OD_EIT is {od} at the reference density; cannot scale to {target}"
        )));
    }
    let scale = medium.vapor.density_scale * target / od;
    if scale > 1.0 {
        return Err(Error::domain(
            "density_scale",
            scale,
            format!("(0, 1]: OD_EIT {target} exceeds the saturated-vapor value"),
        ));
    }
    Ok(scale)
}
