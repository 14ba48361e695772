//! Physical constants and cesium reference data.
//!
//! Everything numeric that is not a fit parameter lives here so that there is
//! one place to audit against CODATA and the cesium D-line tables.

use serde::{Deserialize, Serialize};

/// Unified atomic mass unit (kg), CODATA 2018.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Cesium-133 atomic mass in atomic mass units.
pub const CS133_MASS_U: f64 = 132.905_451_961;

/// Cs D1 (6S1/2 -> 6P1/2) transition frequency (Hz).
pub const CS_D1_FREQUENCY_HZ: f64 = 335.116_048_807e12;

/// Nominal D1 wavelength used for the 1% sanity window on `nu0`.
pub const CS_D1_NOMINAL_WAVELENGTH_M: f64 = 894e-9;

/// Natural linewidth of the Cs D1 line as a population decay rate (rad/s).
pub const CS_D1_NATURAL_LINEWIDTH: f64 = 2.0 * std::f64::consts::PI * 4.56e6;

/// Reduced dipole matrix element <J=1/2||er||J'=1/2> of the Cs D1 line (C m).
pub const CS_D1_REDUCED_DIPOLE: f64 = 2.7020e-29;

/// Relative hyperfine transition strength S_33 for F=3 -> F'=3 on D1.
pub const CS_D1_S33: f64 = 0.25;

/// Thermal population fraction of the F=3 ground level, (2F+1)/16.
pub const CS_F3_POPULATION: f64 = 7.0 / 16.0;

/// Squared-dipole scale applied to the reduced D1 dipole for the signal line:
/// transition strength S_33, isotropic polarization average 1/3 and the F=3
/// population share. The overall scale trades off against `density_scale`.
pub const CS_SIGNAL_DIPOLE_FACTOR: f64 = CS_D1_S33 / 3.0 * CS_F3_POPULATION;

/// Liquid-phase cesium vapor pressure, Antoine form
/// `log10(p / Pa) = A - B / T` with `A = 5.006 + 4.165` and `B = 3830 K`
/// (Alcock, Itkin & Horrigan 1984, liquid branch).
pub mod vapor_pressure {
    pub const A: f64 = 5.006 + 4.165;
    pub const B_KELVIN: f64 = 3830.0;
    pub const T_MIN: f64 = 250.0;
    pub const T_MAX: f64 = 450.0;
}

/// Fundamental constants in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalConstants {
    /// Speed of light (m/s).
    pub c0: f64,
    /// Reduced Planck constant (J s).
    pub hbar: f64,
    /// Vacuum permittivity (F/m).
    pub eps0: f64,
    /// Boltzmann constant (J/K).
    pub k_b: f64,
    /// Electron gyromagnetic ratio magnitude (rad/s/T).
    pub gamma_e: f64,
    /// Cesium atomic mass (kg).
    pub m_cs: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            c0: 299_792_458.0,
            hbar: 1.054_571_817e-34,
            eps0: 8.854_187_812_8e-12,
            k_b: 1.380_649e-23,
            gamma_e: 1.760_859_630_23e11,
            m_cs: CS133_MASS_U * ATOMIC_MASS_UNIT,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> crate::Result<()> {
        let fields = [
            ("c0", self.c0),
            ("hbar", self.hbar),
            ("eps0", self.eps0),
            ("k_b", self.k_b),
            ("gamma_e", self.gamma_e),
            ("m_cs", self.m_cs),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(crate::Error::InvalidParameter(format!(
                    "constant {name} must be positive and finite, got {value}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codata_values_to_six_figures() {
        let k = PhysicalConstants::default();
        let close = |a: f64, b: f64| ((a - b) / b).abs() < 1e-6;
        assert!(close(k.c0, 2.99792458e8));
        assert!(close(k.hbar, 1.0545718e-34));
        assert!(close(k.eps0, 8.8541878e-12));
        assert!(close(k.k_b, 1.380649e-23));
        assert!(close(k.gamma_e, 1.7608596e11));
        assert!(close(k.m_cs, 2.2069469e-25));
        k.validate().unwrap();
    }

    #[test]
    fn non_positive_constant_rejected() {
        let k = PhysicalConstants {
            hbar: 0.0,
            ..Default::default()
        };
        assert!(k.validate().is_err());
    }
}
