//! Experiment configuration: one TOML file with a section per subsystem.
//! Every key has a default, unknown keys are rejected.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::atomic::{LambdaSystem, VaporState};
use crate::constants::PhysicalConstants;
use crate::eit::{calibrate_kappa, ControlDrive, DetuningGrid, EitSettings, Medium, WaveguideSpec};
use crate::estimation::{LifetimeFitSettings, SpectrumFitSettings};
use crate::storage::{
    DetectionSettings, ExtractionSettings, JitterSpec, NoiseMode, SignalPulseSpec, StorageDecayModel,
    StorageSetup, DEFAULT_RETRIEVAL_LEAD,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VaporConfig {
    /// Kelvin.
    pub temperature: f64,
    pub density_scale: f64,
    /// Explicit number density (atoms/m^3) replacing the vapor-pressure value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
}

impl Default for VaporConfig {
    fn default() -> Self {
        Self {
            temperature: 347.15,
            density_scale: 0.14477,
            density: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveConfig {
    /// Peak Rabi frequency (rad/s); takes precedence over any power.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega0: Option<f64>,
    /// `omega0 = kappa sqrt(P)` (rad/s/sqrt(W)); calibrated from the pair
    /// below when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    pub calibration_power: f64,
    pub calibration_omega0: f64,
    /// Control power (W) of single-power commands.
    pub power: f64,
    /// Power ladder (W) for spectrum and slow-light commands.
    pub powers: Vec<f64>,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            omega0: None,
            kappa: None,
            calibration_power: 40e-3,
            calibration_omega0: 2.0 * PI * 232e6,
            power: 10e-3,
            powers: Vec::new(),
        }
    }
}

impl DriveConfig {
    pub fn kappa(&self) -> Result<f64> {
        match self.kappa {
            Some(k) => Ok(k),
            None => calibrate_kappa(self.calibration_power, self.calibration_omega0),
        }
    }

    /// Drive at `power` (W), or the fixed Rabi frequency when one is set.
    pub fn at_power(&self, power: f64) -> Result<ControlDrive> {
        match self.omega0 {
            Some(w) => ControlDrive::from_rabi(w),
            None => ControlDrive::from_power(power, self.kappa()?),
        }
    }

    /// The configured ladder, or the single power when the ladder is empty.
    pub fn ladder(&self) -> Vec<f64> {
        if self.powers.is_empty() {
            vec![self.power]
        } else {
            self.powers.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Detuning half span (Hz).
    pub half_span_hz: f64,
    /// Points on each side of zero.
    pub n_half: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            half_span_hz: 1.5e9,
            n_half: 600,
        }
    }
}

impl GridConfig {
    pub fn grid(&self) -> Result<DetuningGrid> {
        DetuningGrid::centered(self.half_span_hz, self.n_half)
    }
}

/// Evenly spaced values `start, start + step, ...` up to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ladder {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Ladder {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0 && self.stop >= self.start && self.start.is_finite() && self.stop.is_finite()) {
            return Err(Error::Config(format!(
                "ladder needs start <= stop and step > 0, got {self:?}"
            )));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|i| self.start + self.step * i as f64).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceConfig {
    /// Signal FWHM (s); the control width is 1.5 times larger.
    pub signal_width: f64,
    /// Set storage time of single-histogram runs (s).
    pub set_storage: f64,
    pub retrieval_lead: f64,
    /// Set storage times of the lifetime scan.
    pub set_times: Ladder,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        Self {
            signal_width: 14.1e-9,
            set_storage: 90e-9,
            retrieval_lead: DEFAULT_RETRIEVAL_LEAD,
            set_times: Ladder {
                start: 90e-9,
                stop: 440e-9,
                step: 10e-9,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StorageConfig {
    /// Mean photon number per signal pulse.
    pub mean_photons: f64,
    pub noise: NoiseMode,
    /// Capture fraction of single-width runs.
    pub captured_fraction: f64,
}

impl Default for StorageConfig {
    fn default() -> Self {
        Self {
            mean_photons: 50.0,
            noise: NoiseMode::Poisson,
            captured_fraction: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandwidthConfig {
    pub set_storage: f64,
    pub width_start: f64,
    pub width_stop: f64,
    pub width_count: usize,
    /// Control powers (W), one scan each.
    pub powers: Vec<f64>,
    /// Keep the precession term of the decay model; when false the scan
    /// uses `omega = 0`.
    pub precession: bool,
}

impl Default for BandwidthConfig {
    fn default() -> Self {
        Self {
            set_storage: 150e-9,
            width_start: 5e-9,
            width_stop: 54e-9,
            width_count: 50,
            powers: vec![5e-3, 10e-3, 20e-3],
            precession: false,
        }
    }
}

impl BandwidthConfig {
    pub fn widths(&self) -> Result<Vec<f64>> {
        if self.width_count < 2 || !(self.width_start > 0.0 && self.width_stop > self.width_start) {
            return Err(Error::Config(
                "bandwidth widths need 0 < width_start < width_stop and width_count >= 2".into(),
            ));
        }
        let n = self.width_count;
        Ok((0..n)
            .map(|i| self.width_start + (self.width_stop - self.width_start) * i as f64 / (n - 1) as f64)
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultiplexConfig {
    pub channels: usize,
    pub jitter: JitterSpec,
}

impl Default for MultiplexConfig {
    fn default() -> Self {
        Self {
            channels: 2,
            jitter: JitterSpec::default(),
        }
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Root seed of every random stream.
    pub seed: u64,
    /// Output root; each run writes into a subdirectory named by the config
    /// hash.
    pub out: PathBuf,
    pub constants: PhysicalConstants,
    pub system: LambdaSystem,
    pub vapor: VaporConfig,
    pub waveguide: WaveguideSpec,
    pub drive: DriveConfig,
    pub grid: GridConfig,
    pub eit: EitSettings,
    pub sequence: SequenceConfig,
    pub storage: StorageConfig,
    pub detection: DetectionSettings,
    pub memory: StorageDecayModel,
    pub extraction: ExtractionSettings,
    pub bandwidth: BandwidthConfig,
    pub multiplex: MultiplexConfig,
    pub spectrum_fit: SpectrumFitSettings,
    pub lifetime_fit: LifetimeFitSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("runs"),
            constants: Default::default(),
            system: Default::default(),
            vapor: Default::default(),
            waveguide: Default::default(),
            drive: Default::default(),
            grid: Default::default(),
            eit: Default::default(),
            sequence: Default::default(),
            storage: Default::default(),
            detection: Default::default(),
            memory: Default::default(),
            extraction: Default::default(),
            bandwidth: Default::default(),
            multiplex: Default::default(),
            spectrum_fit: Default::default(),
            lifetime_fit: Default::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Resolved configuration, defaults included.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the resolved TOML, hex encoded.
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(self.to_toml()?.as_bytes()))
    }

    /// Check everything that can be checked before computing.
    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        self.medium().map_err(wrap)?;
        self.waveguide.validate().map_err(wrap)?;
        self.eit.validate().map_err(wrap)?;
        self.grid.grid().map_err(wrap)?;
        for p in self.drive.ladder() {
            self.drive.at_power(p).map_err(wrap)?;
        }
        self.signal().validate().map_err(wrap)?;
        self.detection.validate().map_err(wrap)?;
        self.memory.validate().map_err(wrap)?;
        self.extraction.validate().map_err(wrap)?;
        self.sequence.set_times.values()?;
        self.bandwidth.widths()?;
        if !(self.storage.captured_fraction > 0.0 && self.storage.captured_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "storage.captured_fraction = {} is outside (0, 1]",
                self.storage.captured_fraction
            )));
        }
        if self.multiplex.channels < 2 {
            return Err(Error::Config("multiplex.channels must be at least 2".into()));
        }
        Ok(())
    }

    pub fn medium(&self) -> Result<Medium> {
        let k = self.constants;
        let vapor = match self.vapor.density {
            Some(d) => VaporState::with_density(self.vapor.temperature, d, self.vapor.density_scale, &k)?,
            None => VaporState::at_temperature(self.vapor.temperature, self.vapor.density_scale, &k)?,
        };
        Medium::new(k, self.system.clone(), vapor)
    }

    pub fn signal(&self) -> SignalPulseSpec {
        SignalPulseSpec {
            mean_photons: self.storage.mean_photons,
            width: self.sequence.signal_width,
        }
    }

    pub fn storage_setup(&self) -> StorageSetup {
        StorageSetup {
            signal: self.signal(),
            model: self.memory,
            captured_fraction: self.storage.captured_fraction,
            retrieval_lead: self.sequence.retrieval_lead,
            detection: self.detection,
            noise: self.storage.noise,
            extraction: self.extraction,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
