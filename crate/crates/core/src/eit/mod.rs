//! EIT forward model for an attenuating hollow-core waveguide.
//!
//! Conventions: detunings are given in Hz (`delta_hz`, the signal detuning
//! from two-photon resonance) and converted to angular units with `2 pi`
//! internally; rates and Rabi frequencies are angular (rad/s) throughout.

mod doppler;
mod slowlight;
mod spectrum;
mod susceptibility;

pub use doppler::{doppler_convolve, Convolution, DopplerKernel};
pub use slowlight::group_velocity_on_resonance;
pub use spectrum::{
    calibrate_density_scale, calibrate_kappa, eit_window_fwhm, od_eit, rabi_at,
    rabi_vs_power_curve, transmission_spectrum,
};
pub use susceptibility::{susceptibility, LambdaResponse};

use serde::{Deserialize, Serialize};

use crate::atomic::{LambdaSystem, VaporState};
use crate::constants::PhysicalConstants;
use crate::{Error, Result};

/// Guided-path geometry of one hollow-core waveguide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveguideSpec {
    /// Optical length of the guided region (m).
    pub length: f64,
    /// Modal attenuation (dB/mm, positive means loss).
    pub attenuation_db_per_mm: f64,
    /// Fraction of the input power coupled into the guided mode.
    pub coupling_efficiency: f64,
    /// Length available to hold a compressed pulse (m).
    pub cell_length: f64,
}

impl Default for WaveguideSpec {
    fn default() -> Self {
        Self {
            length: 5e-3,
            attenuation_db_per_mm: 1.51,
            coupling_efficiency: 0.20,
            cell_length: 5e-3,
        }
    }
}

impl WaveguideSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::domain("waveguide length", self.length, "> 0 m"));
        }
        if !(self.attenuation_db_per_mm.is_finite() && self.attenuation_db_per_mm >= 0.0) {
            return Err(Error::domain(
                "attenuation_db_per_mm",
                self.attenuation_db_per_mm,
                ">= 0 dB/mm",
            ));
        }
        if !(self.coupling_efficiency > 0.0 && self.coupling_efficiency <= 1.0) {
            return Err(Error::domain(
                "coupling_efficiency",
                self.coupling_efficiency,
                "(0, 1]",
            ));
        }
        if !(self.cell_length >= self.length) {
            return Err(Error::domain(
                "cell_length",
                self.cell_length,
                format!(">= waveguide length {} m", self.length),
            ));
        }
        Ok(())
    }

    /// Attenuation in dB per metre.
    pub fn attenuation_db_per_m(&self) -> f64 {
        self.attenuation_db_per_mm * 1e3
    }
}

/// Control field drive at the waveguide entrance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlDrive {
    /// Peak Rabi frequency at z = 0 (rad/s).
    pub omega0: f64,
    /// Control power (W), when the drive was built from a power calibration.
    pub power: Option<f64>,
    /// Calibration `omega0 = kappa sqrt(power)` (rad/s/sqrt(W)).
    pub kappa: Option<f64>,
}

impl ControlDrive {
    pub fn from_rabi(omega0: f64) -> Result<Self> {
        if !(omega0.is_finite() && omega0 >= 0.0) {
            return Err(Error::domain("omega0", omega0, ">= 0 rad/s"));
        }
        Ok(Self {
            omega0,
            power: None,
            kappa: None,
        })
    }

    pub fn from_power(power: f64, kappa: f64) -> Result<Self> {
        if !(power.is_finite() && power >= 0.0) {
            return Err(Error::domain("control power", power, ">= 0 W"));
        }
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::domain("kappa", kappa, ">= 0 rad/s/sqrt(W)"));
        }
        Ok(Self {
            omega0: kappa * power.sqrt(),
            power: Some(power),
            kappa: Some(kappa),
        })
    }
}

/// Uniform, ascending grid of signal detunings (Hz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DetuningGrid {
    values: Vec<f64>,
}

impl DetuningGrid {
    /// `n` points from `start` to `stop` inclusive.
    pub fn uniform(start: f64, stop: f64, n: usize) -> Result<Self> {
        if n < 2 || !(stop > start) {
            return Err(Error::InvalidParameter(format!(
                "detuning grid needs n >= 2 and stop > start (n = {n}, [{start}, {stop}])"
            )));
        }
        let h = (stop - start) / (n - 1) as f64;
        let values = (0..n).map(|i| start + h * i as f64).collect();
        Ok(Self { values })
    }

    /// Symmetric grid `[-half_span, half_span]` with an odd point count so
    /// that zero detuning is a grid node.
    pub fn centered(half_span: f64, n_half: usize) -> Result<Self> {
        let n = 2 * n_half + 1;
        let mut grid = Self::uniform(-half_span, half_span, n)?;
        grid.values[n_half] = 0.0;
        Ok(grid)
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidParameter(
                "detuning grid needs at least two points".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("detuning grid value".into()));
        }
        let h = (values[values.len() - 1] - values[0]) / (values.len() - 1) as f64;
        if !(h > 0.0) {
            return Err(Error::InvalidParameter(
                "detuning grid must be strictly ascending".into(),
            ));
        }
        let scale = values[0].abs().max(values[values.len() - 1].abs()).max(h);
        for (i, w) in values.windows(2).enumerate() {
            let step = w[1] - w[0];
            if !(step > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "detuning grid not strictly ascending at index {}",
                    i + 1
                )));
            }
            // Uniform to 1e-9 of the step, with room for the rounding of
            // absolute detunings far from zero.
            if (step - h).abs() > 1e-9 * h + 4.0 * f64::EPSILON * scale {
                return Err(Error::InvalidParameter(format!(
                    "detuning grid spacing not uniform at index {} ({step} vs {h})",
                    i + 1
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        (self.values[self.len() - 1] - self.values[0]) / (self.len() - 1) as f64
    }

    pub fn span(&self) -> f64 {
        self.values[self.len() - 1] - self.values[0]
    }

    /// Index of the node at zero detuning (within half a step).
    pub fn zero_index(&self) -> Result<usize> {
        let h = self.spacing();
        self.values
            .iter()
            .position(|v| v.abs() <= 0.5 * h * (1.0 + 1e-9))
            .ok_or_else(|| Error::NotFound("detuning grid does not contain zero".into()))
    }
}

impl TryFrom<Vec<f64>> for DetuningGrid {
    type Error = Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::from_values(values)
    }
}

impl From<DetuningGrid> for Vec<f64> {
    fn from(g: DetuningGrid) -> Self {
        g.values
    }
}

/// Transmission spectrum over a detuning grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub grid: DetuningGrid,
    pub transmission: Vec<f64>,
    /// Path-integrated `Re chi~` (m).
    pub chi_re: Option<Vec<f64>>,
    /// Path-integrated `Im chi~` (m).
    pub chi_im: Option<Vec<f64>>,
    /// Accuracy notes raised while computing the spectrum.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Spectrum {
    pub fn new(grid: DetuningGrid, transmission: Vec<f64>) -> Result<Self> {
        if transmission.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "spectrum has {} values for a {}-point grid",
                transmission.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            transmission,
            chi_re: None,
            chi_im: None,
            warnings: Vec::new(),
        })
    }

    /// Transmission at zero detuning.
    pub fn on_resonance(&self) -> Result<f64> {
        Ok(self.transmission[self.grid.zero_index()?])
    }
}

/// Slow-light figures at two-photon resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlowLightResult {
    /// Transit-time averaged group velocity (m/s).
    pub group_velocity: f64,
    /// `c0 / group_velocity`.
    pub compression_factor: f64,
    /// Spatial length of the compressed pulse (m).
    pub compressed_length: f64,
    /// `min(1, cell_length / compressed_length)`.
    pub captured_fraction: f64,
    /// Pulse FWHM used for the compressed length (s).
    pub pulse_width: f64,
}

/// How the Doppler average treats the two detunings of the lambda system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DopplerModel {
    /// Co-propagating beams: an atom moving at `v` sees its one-photon
    /// detuning shifted by `nu0 v / c0` while the two-photon detuning is
    /// unchanged (the residual ground-splitting term is dropped).
    #[default]
    CoPropagating,
    /// The whole argument of `chi(delta)` is shifted by `nu0 v / c0`.
    FullShift,
}

/// Refractive index convention used for the group velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IndexConvention {
    /// `n = Re(1 + chi~)`.
    #[default]
    Linear,
    /// Dilute-medium expansion `n = 1 + Re(chi~) / 2`.
    Dilute,
}

/// Numerical settings of the forward model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EitSettings {
    /// Gauss-Legendre order per panel along z.
    pub z_order: usize,
    /// Number of panels along z (`z_order * z_panels` nodes in total).
    pub z_panels: usize,
    /// Re-run with doubled panels and fail if any transmission moves by more
    /// than `z_tolerance`.
    pub check_convergence: bool,
    pub z_tolerance: f64,
    pub doppler_model: DopplerModel,
    pub index_convention: IndexConvention,
    /// Central-difference step for dn/dnu (Hz).
    pub fd_step_hz: f64,
}

impl Default for EitSettings {
    fn default() -> Self {
        Self {
            z_order: 16,
            z_panels: 4,
            check_convergence: true,
            z_tolerance: 1e-6,
            doppler_model: DopplerModel::CoPropagating,
            index_convention: IndexConvention::Linear,
            fd_step_hz: 1e4,
        }
    }
}

impl EitSettings {
    pub fn validate(&self) -> Result<()> {
        if self.z_order == 0 || self.z_panels == 0 {
            return Err(Error::InvalidParameter(
                "z quadrature needs z_order >= 1 and z_panels >= 1".into(),
            ));
        }
        if !(self.z_tolerance > 0.0) {
            return Err(Error::domain("z_tolerance", self.z_tolerance, "> 0"));
        }
        if !(self.fd_step_hz > 0.0 && self.fd_step_hz.is_finite()) {
            return Err(Error::domain("fd_step_hz", self.fd_step_hz, "> 0 Hz"));
        }
        Ok(())
    }

    pub fn z_nodes(&self) -> usize {
        self.z_order * self.z_panels
    }
}

/// Atomic medium: constants, level scheme and vapor state together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Medium {
    pub constants: PhysicalConstants,
    pub system: LambdaSystem,
    pub vapor: VaporState,
}

impl Medium {
    pub fn new(constants: PhysicalConstants, system: LambdaSystem, vapor: VaporState) -> Result<Self> {
        constants.validate()?;
        system.validate(&constants)?;
        Ok(Self {
            constants,
            system,
            vapor,
        })
    }

    /// Cesium D1 defaults at `temperature` with a density scale.
    pub fn cesium(temperature: f64, density_scale: f64) -> Result<Self> {
        let k = PhysicalConstants::default();
        let vapor = VaporState::at_temperature(temperature, density_scale, &k)?;
        Self::new(k, LambdaSystem::default(), vapor)
    }

    pub fn with_density_scale(&self, density_scale: f64) -> Result<Self> {
        let vapor = VaporState::with_density(
            self.vapor.temperature,
            self.vapor.density,
            density_scale,
            &self.constants,
        )?;
        Ok(Self {
            vapor,
            ..self.clone()
        })
    }

    pub fn response(&self) -> LambdaResponse {
        LambdaResponse::new(&self.system, &self.vapor, &self.constants)
    }

    /// Conversion `4 pi nu0 / c0` from path-integrated `Im chi` to optical
    /// depth (1/m).
    pub fn od_per_chi_length(&self) -> f64 {
        4.0 * std::f64::consts::PI * self.system.nu0 / self.constants.c0
    }
}
