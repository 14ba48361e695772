use num_complex::Complex64;

use super::DetuningGrid;
use crate::atomic::{LambdaSystem, VaporState};
use crate::constants::PhysicalConstants;
use crate::quadrature::GaussHermite;
use crate::{Error, Result};

/// Gaussian Doppler kernel over the signal detuning.
#[derive(Debug, Clone)]
pub struct DopplerKernel {
    /// Standard deviation of the Doppler shift (Hz).
    pub sigma_hz: f64,
    rule: GaussHermite,
}

impl DopplerKernel {
    pub const DEFAULT_NODES: usize = 96;

    pub fn new(vapor: &VaporState, system: &LambdaSystem, k: &PhysicalConstants) -> Self {
        Self::with_sigma(vapor.doppler_sigma_hz(system, k), Self::DEFAULT_NODES)
    }

    pub fn with_sigma(sigma_hz: f64, nodes: usize) -> Self {
        Self {
            sigma_hz,
            rule: GaussHermite::new(nodes),
        }
    }

    pub fn fwhm_hz(&self) -> f64 {
        2.0 * (2.0 * std::f64::consts::LN_2).sqrt() * self.sigma_hz
    }

    /// Doppler shifts (Hz) and normalized weights.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.rule.normal_points(self.sigma_hz)
    }
}

/// Doppler-averaged values with accuracy notes.
#[derive(Debug, Clone)]
pub struct Convolution {
    pub values: Vec<Complex64>,
    pub warnings: Vec<String>,
}

/// Average `chi(delta - shift)` over the Maxwell-Boltzmann Doppler shift for
/// every grid detuning, by Gauss-Hermite quadrature.
///
/// Suited to susceptibilities that are smooth on the scale of the Doppler
/// width; the forward model itself uses the exact pole expansion in
/// [`LambdaResponse`](super::LambdaResponse).
pub fn doppler_convolve<F>(chi: F, grid: &DetuningGrid, kernel: &DopplerKernel) -> Result<Convolution>
where
    F: Fn(f64) -> Complex64,
{
    let mut warnings = Vec::new();
    let fwhm = kernel.fwhm_hz();
    if grid.span() < 6.0 * fwhm {
        warnings.push(format!(
            "detuning span {:.4e} Hz is below 6 Doppler widths ({:.4e} Hz)",
            grid.span(),
            6.0 * fwhm
        ));
    }
    if grid.spacing() > fwhm / 10.0 {
        warnings.push(format!(
            "detuning spacing {:.4e} Hz exceeds a tenth of the Doppler width ({:.4e} Hz)",
            grid.spacing(),
            fwhm / 10.0
        ));
    }
    let points: Vec<(f64, f64)> = kernel.points().collect();
    let mut values = Vec::with_capacity(grid.len());
    for &delta in grid.values() {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(shift, w) in &points {
            let c = chi(delta - shift);
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "susceptibility at detuning {} Hz",
                    delta - shift
                )));
            }
            acc += w * c;
        }
        values.push(acc);
    }
    Ok(Convolution { values, warnings })
}
