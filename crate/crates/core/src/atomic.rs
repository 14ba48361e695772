//! Cesium D1 lambda system, vapor thermodynamics and Larmor conversions.
//!
//! Rates (`gamma31`, `gamma_d`) are angular (rad/s). Frequencies passed in Hz
//! are converted with an explicit `2 pi` at the call site.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{self, vapor_pressure, PhysicalConstants};
use crate::{Error, Result};

/// Three-level lambda system on the Cs D1 line.
///
/// The signal drives F=3 -> F'=3, the control drives F=4 -> F'=3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LambdaSystem {
    /// Signal transition frequency (Hz).
    pub nu0: f64,
    /// Excited-state coherence decay rate (rad/s).
    pub gamma31: f64,
    /// Ground-state decoherence rate (rad/s).
    pub gamma_d: f64,
    /// Effective transition dipole moment (C m).
    pub mu31: f64,
    pub signal_label: String,
    pub control_label: String,
}

impl Default for LambdaSystem {
    fn default() -> Self {
        Self {
            nu0: constants::CS_D1_FREQUENCY_HZ,
            gamma31: 0.5 * constants::CS_D1_NATURAL_LINEWIDTH,
            gamma_d: 2.0 * PI * 100e3,
            mu31: constants::CS_D1_REDUCED_DIPOLE * constants::CS_SIGNAL_DIPOLE_FACTOR.sqrt(),
            signal_label: "6S1/2 F=3 -> 6P1/2 F'=3".into(),
            control_label: "6S1/2 F=4 -> 6P1/2 F'=3".into(),
        }
    }
}

impl LambdaSystem {
    /// Signal wavelength `c0 / nu0` (m).
    pub fn lambda0(&self, k: &PhysicalConstants) -> f64 {
        k.c0 / self.nu0
    }

    pub fn validate(&self, k: &PhysicalConstants) -> Result<()> {
        if !(self.gamma_d >= 0.0 && self.gamma31 > self.gamma_d) {
            return Err(Error::InvalidParameter(format!(
                "lambda system needs gamma31 > gamma_d >= 0 (gamma31 = {}, gamma_d = {})",
                self.gamma31, self.gamma_d
            )));
        }
        let nominal = k.c0 / constants::CS_D1_NOMINAL_WAVELENGTH_M;
        if ((self.nu0 - nominal) / nominal).abs() > 0.01 {
            return Err(Error::domain(
                "nu0",
                self.nu0,
                format!("within 1% of {nominal:.6e} Hz"),
            ));
        }
        if !(self.mu31.is_finite() && self.mu31 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mu31 must be positive, got {}",
                self.mu31
            )));
        }
        Ok(())
    }

    /// Susceptibility prefactor `|mu31|^2 rho / (eps0 hbar)` (rad/s) for an
    /// effective number density `rho`.
    pub fn prefactor(&self, rho: f64, k: &PhysicalConstants) -> f64 {
        self.mu31 * self.mu31 * rho / (k.eps0 * k.hbar)
    }
}

/// Thermodynamic state of the vapor seen by the guided mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaporState {
    /// Kelvin.
    pub temperature: f64,
    /// Saturated number density at `temperature` (atoms/m^3).
    pub density: f64,
    /// Mean thermal speed `sqrt(8 kB T / (pi m))` (m/s).
    pub mean_speed: f64,
    /// Multiplier for the reduced in-waveguide density, in (0, 1].
    pub density_scale: f64,
}

impl VaporState {
    /// Saturated vapor at `temperature`, with density from the liquid-phase
    /// vapor-pressure curve.
    pub fn at_temperature(
        temperature: f64,
        density_scale: f64,
        k: &PhysicalConstants,
    ) -> Result<Self> {
        let density = vapor_density(temperature, k)?;
        Self::with_density(temperature, density, density_scale, k)
    }

    /// Vapor with an explicit number density (e.g. an evacuated cell).
    pub fn with_density(
        temperature: f64,
        density: f64,
        density_scale: f64,
        k: &PhysicalConstants,
    ) -> Result<Self> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::domain("temperature", temperature, "> 0 K"));
        }
        if !(density.is_finite() && density >= 0.0) {
            return Err(Error::domain("density", density, ">= 0 atoms/m^3"));
        }
        if !(density_scale > 0.0 && density_scale <= 1.0) {
            return Err(Error::domain("density_scale", density_scale, "(0, 1]"));
        }
        Ok(Self {
            temperature,
            density,
            mean_speed: mean_speed(temperature, k),
            density_scale,
        })
    }

    pub fn effective_density(&self) -> f64 {
        self.density * self.density_scale
    }

    /// One-dimensional velocity standard deviation `sqrt(kB T / m)` (m/s).
    pub fn velocity_sigma(&self, k: &PhysicalConstants) -> f64 {
        (k.k_b * self.temperature / k.m_cs).sqrt()
    }

    /// Standard deviation of the Doppler shift `nu0 v / c0` (Hz).
    pub fn doppler_sigma_hz(&self, system: &LambdaSystem, k: &PhysicalConstants) -> f64 {
        system.nu0 * self.velocity_sigma(k) / k.c0
    }

    /// Doppler full width at half maximum (Hz).
    pub fn doppler_fwhm_hz(&self, system: &LambdaSystem, k: &PhysicalConstants) -> f64 {
        2.0 * (2.0 * std::f64::consts::LN_2).sqrt() * self.doppler_sigma_hz(system, k)
    }
}

/// Cs vapor pressure (Pa) on the liquid branch. Valid 250 K..=450 K.
pub fn vapor_pressure(temperature: f64) -> Result<f64> {
    if !(vapor_pressure::T_MIN..=vapor_pressure::T_MAX).contains(&temperature) {
        return Err(Error::domain(
            "temperature",
            temperature,
            format!("[{} K, {} K]", vapor_pressure::T_MIN, vapor_pressure::T_MAX),
        ));
    }
    Ok(10f64.powf(vapor_pressure::A - vapor_pressure::B_KELVIN / temperature))
}

/// Saturated number density `p(T) / (kB T)` (atoms/m^3).
pub fn vapor_density(temperature: f64, k: &PhysicalConstants) -> Result<f64> {
    Ok(vapor_pressure(temperature)? / (k.k_b * temperature))
}

pub fn mean_speed(temperature: f64, k: &PhysicalConstants) -> f64 {
    (8.0 * k.k_b * temperature / (PI * k.m_cs)).sqrt()
}

/// One-dimensional Maxwell-Boltzmann velocity density (s/m).
pub fn maxwell_boltzmann_velocity_pdf(
    v: f64,
    temperature: f64,
    k: &PhysicalConstants,
) -> Result<f64> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::domain("temperature", temperature, "> 0 K"));
    }
    let var = k.k_b * temperature / k.m_cs;
    Ok((-0.5 * v * v / var).exp() / (2.0 * PI * var).sqrt())
}

/// Larmor angular frequency `gamma_e B` (rad/s).
///
/// Uses the free-electron gyromagnetic ratio, not a hyperfine g_F factor.
pub fn larmor_angular_frequency(b_tesla: f64, k: &PhysicalConstants) -> Result<f64> {
    if !(b_tesla >= 0.0) {
        return Err(Error::domain("magnetic field", b_tesla, ">= 0 T"));
    }
    Ok(k.gamma_e * b_tesla)
}

/// Inverse of [`larmor_angular_frequency`] for an ordinary precession
/// frequency `f = omega / 2 pi` (Hz).
pub fn b_field_from_precession(f_hz: f64, k: &PhysicalConstants) -> Result<f64> {
    if !(f_hz >= 0.0) {
        return Err(Error::domain("precession frequency", f_hz, ">= 0 Hz"));
    }
    Ok(2.0 * PI * f_hz / k.gamma_e)
}
