//! Write-store-read pulse sequence, photon-count histograms, efficiency
//! extraction and the lifetime, bandwidth and multi-channel scans.

mod extract;
mod histogram;
mod scans;

pub use extract::{extract_efficiency, EfficiencyResult, ExtractionSettings};
pub use histogram::{synthesize_histogram, DetectionSettings, HistogramMetadata, NoiseMode, TimeHistogram};
pub use scans::{
    bandwidth_crossing, bandwidth_curve, bandwidth_scan, lifetime_scan, model_at_measured_times,
    multiplex_ensemble, BandwidthPoint, BandwidthScan, CaptureModel, ChannelResult, CurvePoint,
    EfficiencyCurve, JitterSpec, MultiplexResult, MultiplexSetup, SlowLightContext, StorageRun,
    StorageSetup, MINUS_3_DB,
};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::estimation::lifetime_model;
use crate::{Error, Result};

/// Ratio of signal width to control width.
pub const SIGNAL_TO_CONTROL_WIDTH: f64 = 2.0 / 3.0;
/// Ratio of signal delay (after the write-pulse centre) to control width.
pub const DELAY_TO_CONTROL_WIDTH: f64 = 1.0 / 3.0;

/// Retrieval lead that maps a 90 ns set storage time with 14.1 ns signal
/// pulses to a 52.37 ns measured storage time: `90 - 21.15 / 3 - 52.37` ns.
pub const DEFAULT_RETRIEVAL_LEAD: f64 = 30.58e-9;

/// FWHM of a Gaussian divided by its standard deviation.
pub(crate) const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Timing of one write-store-read cycle (all in seconds, FWHM widths).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub control_width: f64,
    pub signal_width: f64,
    /// Signal centre after the write-pulse centre.
    pub signal_delay: f64,
    /// Write-pulse centre to read-pulse centre.
    pub set_storage: f64,
    /// Retrieved pulse centre ahead of the read-pulse centre.
    pub retrieval_lead: f64,
}

/// Absolute pulse centres, with the write pulse at t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    /// Optical pumping pulse, two control widths ahead of the write pulse.
    pub pump: f64,
    pub write: f64,
    pub signal: f64,
    pub read: f64,
    /// Expected centre of the retrieved signal.
    pub retrieval: f64,
}

/// Timing rules: signal width `2/3` and signal delay `1/3` of the control
/// width.
pub fn sequence_timings(control_width: f64, set_storage: f64, retrieval_lead: f64) -> Result<PulseSequence> {
    if !(control_width.is_finite() && control_width > 0.0) {
        return Err(Error::domain("control_width", control_width, "> 0 s"));
    }
    if !retrieval_lead.is_finite() || retrieval_lead < 0.0 {
        return Err(Error::domain("retrieval_lead", retrieval_lead, ">= 0 s"));
    }
    if !(set_storage > control_width) {
        return Err(Error::Overlap(format!(
            "set storage time {set_storage:.4e} s does not exceed the control width {control_width:.4e} s"
        )));
    }
    Ok(PulseSequence {
        control_width,
        signal_width: SIGNAL_TO_CONTROL_WIDTH * control_width,
        signal_delay: DELAY_TO_CONTROL_WIDTH * control_width,
        set_storage,
        retrieval_lead,
    })
}

impl PulseSequence {
    /// Sequence for a given signal width (control width `1.5 x` larger).
    pub fn for_signal_width(signal_width: f64, set_storage: f64, retrieval_lead: f64) -> Result<Self> {
        sequence_timings(signal_width / SIGNAL_TO_CONTROL_WIDTH, set_storage, retrieval_lead)
    }

    /// Leak-to-retrieval time `set_storage - signal_delay - retrieval_lead`.
    pub fn predicted_storage(&self) -> f64 {
        self.set_storage - self.signal_delay - self.retrieval_lead
    }

    pub fn schedule(&self) -> PulseSchedule {
        PulseSchedule {
            pump: -2.0 * self.control_width,
            write: 0.0,
            signal: self.signal_delay,
            read: self.set_storage,
            retrieval: self.set_storage - self.retrieval_lead,
        }
    }

    /// Gaussian standard deviation of the signal pulse.
    pub fn signal_sigma(&self) -> f64 {
        self.signal_width / FWHM_PER_SIGMA
    }
}

/// Weak coherent input pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalPulseSpec {
    /// Mean photon number per pulse.
    pub mean_photons: f64,
    /// FWHM (s).
    pub width: f64,
}

impl Default for SignalPulseSpec {
    fn default() -> Self {
        Self {
            mean_photons: 50.0,
            width: 14.1e-9,
        }
    }
}

impl SignalPulseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_photons.is_finite() && self.mean_photons > 0.0) {
            return Err(Error::domain("mean_photons", self.mean_photons, "> 0"));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::domain("signal width", self.width, "> 0 s"));
        }
        Ok(())
    }
}

/// Damped-precession efficiency model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StorageDecayModel {
    /// 1/e memory lifetime (s).
    pub t_mem: f64,
    /// Precession angular frequency (rad/s).
    pub omega: f64,
    /// Phase (rad).
    pub phi: f64,
    /// Efficiency scale at t = 0.
    pub eta0: f64,
}

/// Reference operating point: efficiency 0.0982 at 52.37 ns.
pub const REFERENCE_EFFICIENCY: f64 = 0.0982;
pub const REFERENCE_STORAGE_TIME: f64 = 52.37e-9;

impl Default for StorageDecayModel {
    fn default() -> Self {
        let base = Self {
            t_mem: 84e-9,
            omega: 2.0 * PI * 3.573e6,
            phi: PI / 2.0,
            eta0: 1.0,
        };
        let eta0 = REFERENCE_EFFICIENCY / storage_efficiency(REFERENCE_STORAGE_TIME, &base, 1.0);
        Self { eta0, ..base }
    }
}

impl StorageDecayModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_mem.is_finite() && self.t_mem > 0.0) {
            return Err(Error::domain("t_mem", self.t_mem, "> 0 s"));
        }
        if !(0.0..=1.0).contains(&self.eta0) {
            return Err(Error::domain("eta0", self.eta0, "[0, 1]"));
        }
        if !self.omega.is_finite() || !self.phi.is_finite() {
            return Err(Error::NonFinite("precession frequency or phase".into()));
        }
        Ok(())
    }

    /// Same model with `eta0` chosen so that the efficiency at `t` with
    /// capture fraction `captured_fraction` equals `target`.
    pub fn calibrated(&self, target: f64, t: f64, captured_fraction: f64) -> Result<Self> {
        let unit = storage_efficiency(t, &Self { eta0: 1.0, ..*self }, captured_fraction);
        if !(unit > 0.0) {
            return Err(Error::ModelValidity(format!(
                "efficiency vanishes at t = {t:.4e} s; cannot calibrate eta0"
            )));
        }
        let eta0 = target / unit;
        if !(0.0..=1.0).contains(&eta0) {
            return Err(Error::domain("eta0", eta0, "[0, 1]"));
        }
        Ok(Self { eta0, ..*self })
    }
}

/// `eta0 * captured_fraction * exp(-t / t_mem) * sin^2(omega t / 2 + phi)`.
pub fn storage_efficiency(t: f64, model: &StorageDecayModel, captured_fraction: f64) -> f64 {
    lifetime_model(t, model.t_mem, model.omega, model.phi, model.eta0 * captured_fraction)
}
