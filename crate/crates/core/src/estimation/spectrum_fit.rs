use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{minimize, FitProblem, FitResult, LmSettings, ModelId, ParameterSpec};
use crate::eit::{
    eit_window_fwhm, od_eit, transmission_spectrum, ControlDrive, DetuningGrid, EitSettings, Medium,
    WaveguideSpec,
};
use crate::{Error, Result};

/// Settings of the spectrum fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumFitSettings {
    pub lm: LmSettings,
    /// Forward-model settings; the z-convergence check is skipped inside the
    /// fit loop.
    pub eit: EitSettings,
    /// Relative transmission uncertainty used when none is supplied.
    pub relative_sigma: f64,
    /// Also fit the ground-state decoherence rate.
    pub float_gamma_d: bool,
    /// Start value for the peak Rabi frequency (rad/s); scanned when unset.
    pub initial_omega0: Option<f64>,
    /// Start value for the density scale; matched to the data when unset.
    pub initial_density_scale: Option<f64>,
    /// Upper bound on the peak Rabi frequency (rad/s).
    pub max_omega0: f64,
}

impl Default for SpectrumFitSettings {
    fn default() -> Self {
        Self {
            lm: LmSettings::default(),
            eit: EitSettings::default(),
            relative_sigma: 0.01,
            float_gamma_d: false,
            initial_omega0: None,
            initial_density_scale: None,
            max_omega0: 2.0 * PI * 2e9,
        }
    }
}

const MIN_POINTS: usize = 50;
const MIN_DENSITY_SCALE: f64 = 1e-6;

fn model_transmission(
    p: &[f64],
    float_gamma_d: bool,
    grid: &DetuningGrid,
    wg: &WaveguideSpec,
    template: &Medium,
    eit: &EitSettings,
) -> Result<Vec<f64>> {
    let mut medium = template.with_density_scale(p[1])?;
    if float_gamma_d {
        medium.system.gamma_d = p[2];
    }
    let drive = ControlDrive::from_rabi(p[0])?;
    Ok(transmission_spectrum(wg, &drive, &medium, grid, eit)?.transmission)
}

/// Fit the peak Rabi frequency and density scale (and optionally the
/// ground-state decoherence) of the forward model to a measured spectrum.
///
/// Derived quantities (`od_eit`, `eit_fwhm_hz`) are evaluated from the model
/// at the estimates on a fine grid spanning the data.
pub fn fit_spectrum(
    grid: &DetuningGrid,
    transmission: &[f64],
    sigma: Option<&[f64]>,
    wg: &WaveguideSpec,
    template: &Medium,
    settings: &SpectrumFitSettings,
) -> Result<FitResult> {
    if grid.len() != transmission.len() {
        return Err(Error::InvalidParameter(format!(
            "{} transmission values for a {}-point grid",
            transmission.len(),
            grid.len()
        )));
    }
    if grid.len() < MIN_POINTS {
        return Err(Error::InvalidParameter(format!(
            "spectrum fit needs at least {MIN_POINTS} points, got {}",
            grid.len()
        )));
    }
    if !(settings.relative_sigma > 0.0) {
        return Err(Error::domain("relative_sigma", settings.relative_sigma, "> 0"));
    }
    let sigma: Vec<f64> = match sigma {
        Some(s) => s.to_vec(),
        None => transmission
            .iter()
            .map(|t| settings.relative_sigma * t.max(1e-6))
            .collect(),
    };
    let eit = EitSettings {
        check_convergence: false,
        ..settings.eit
    };
    let fg = settings.float_gamma_d;

    // Start values: density from the off-control optical depth, Rabi
    // frequency from a coarse log scan.
    let od_data: Vec<f64> = transmission.iter().map(|t| -t.max(1e-12).ln()).collect();
    let scale_for = |omega: f64| -> Result<f64> {
        if let Some(s) = settings.initial_density_scale {
            return Ok(s);
        }
        let unit = model_transmission(&[omega, 1.0, template.system.gamma_d], false, grid, wg, template, &eit)?;
        let od_unit: Vec<f64> = unit.iter().map(|t| -t.max(1e-300).ln()).collect();
        let num: f64 = od_unit.iter().zip(&od_data).map(|(m, d)| m * d).sum();
        let den: f64 = od_unit.iter().map(|m| m * m).sum();
        Ok(if den > 0.0 { num / den } else { 1.0 }.clamp(MIN_DENSITY_SCALE, 1.0))
    };
    let loss_at = |p: &[f64]| -> Result<f64> {
        let m = model_transmission(p, false, grid, wg, template, &eit)?;
        Ok(m.iter()
            .zip(transmission)
            .zip(&sigma)
            .map(|((a, b), s)| ((a - b) / s).powi(2))
            .sum())
    };
    let (omega0, scale0) = match settings.initial_omega0 {
        Some(w) => (w.min(settings.max_omega0), scale_for(w)?),
        None => {
            let mut best = (f64::INFINITY, 0.0, 1.0);
            for i in 0..16 {
                let w = 2.0 * PI * 10e6 * (settings.max_omega0 / (2.0 * PI * 10e6)).powf(i as f64 / 15.0);
                let s = scale_for(w)?;
                let l = loss_at(&[w, s])?;
                if l < best.0 {
                    best = (l, w, s);
                }
            }
            (best.1, best.2)
        }
    };

    let mut params = vec![
        ParameterSpec::new("omega0", omega0, 0.0, settings.max_omega0),
        ParameterSpec::new("density_scale", scale0, MIN_DENSITY_SCALE, 1.0),
    ];
    if fg {
        let g = template.system.gamma_d;
        params.push(ParameterSpec::new("gamma_d", g, 0.0, 0.99 * template.system.gamma31));
    }
    let grid_c = grid.clone();
    let wg_c = *wg;
    let template_c = template.clone();
    let problem = FitProblem::new(
        ModelId::Spectrum,
        params,
        grid.values().to_vec(),
        transmission.to_vec(),
        sigma,
        move |p| model_transmission(p, fg, &grid_c, &wg_c, &template_c, &eit),
    )?;
    let mut fit = minimize(&problem, &problem.initial(), &settings.lm)?;

    // derived figures on a fine symmetric grid covering the data
    let half = grid.values()[0].abs().max(grid.values()[grid.len() - 1].abs());
    let fine = DetuningGrid::centered(half, 1000)?;
    let mut medium = template.with_density_scale(fit.estimates[1])?;
    if fg {
        medium.system.gamma_d = fit.estimates[2];
    }
    let on = transmission_spectrum(wg, &ControlDrive::from_rabi(fit.estimates[0])?, &medium, &fine, &eit)?;
    let off = transmission_spectrum(wg, &ControlDrive::from_rabi(0.0)?, &medium, &fine, &eit)?;
    fit.derived.insert("od_eit".into(), od_eit(&on, &off)?);
    match eit_window_fwhm(&on) {
        Ok(w) => {
            fit.derived.insert("eit_fwhm_hz".into(), w);
        }
        Err(e) => fit.warnings.push(format!("transparency window width: {e}")),
    }
    Ok(fit)
}
