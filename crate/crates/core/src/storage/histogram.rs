use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{storage_efficiency, PulseSequence, SignalPulseSpec, StorageDecayModel};
use crate::estimation::normal_interval;
use crate::{rng, Error, Result};

/// Photon detection chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionSettings {
    /// Sequence repetitions summed into one histogram.
    pub repetitions: u32,
    /// Overall detection efficiency in (0, 1].
    pub detection_efficiency: f64,
    /// Histogram bin width (s).
    pub bin_width: f64,
    /// Flat background (mean counts per bin, whole histogram).
    pub background_per_bin: f64,
}

impl Default for DetectionSettings {
    fn default() -> Self {
        Self {
            repetitions: 3000,
            detection_efficiency: 1.0,
            bin_width: 0.5e-9,
            background_per_bin: 0.0,
        }
    }
}

impl DetectionSettings {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::domain("repetitions", 0.0, ">= 1"));
        }
        if !(self.detection_efficiency > 0.0 && self.detection_efficiency <= 1.0) {
            return Err(Error::domain(
                "detection_efficiency",
                self.detection_efficiency,
                "(0, 1]",
            ));
        }
        if !(self.bin_width.is_finite() && self.bin_width > 0.0) {
            return Err(Error::domain("bin_width", self.bin_width, "> 0 s"));
        }
        if !(self.background_per_bin.is_finite() && self.background_per_bin >= 0.0) {
            return Err(Error::domain("background_per_bin", self.background_per_bin, ">= 0"));
        }
        Ok(())
    }
}

/// How bin counts are generated from their expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Independent Poisson draw per bin.
    #[default]
    Poisson,
    /// Expected counts, no noise.
    Expectation,
}

/// Everything that produced a histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramMetadata {
    pub sequence: PulseSequence,
    pub signal: SignalPulseSpec,
    pub model: StorageDecayModel,
    pub captured_fraction: f64,
    pub detection: DetectionSettings,
    pub noise: NoiseMode,
    pub seed: u64,
    /// Efficiency programmed at the predicted storage time.
    pub eta_programmed: f64,
    /// Programmed leak-to-read distance (s).
    pub t_storage_programmed: f64,
}

/// Photon arrival histogram with its time origin at the leak-pulse centre.
///
/// Bin `i` spans `[t0 + i bin_width, t0 + (i + 1) bin_width)`. Counts are
/// whole numbers in Poisson mode and expectation values otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeHistogram {
    pub bin_width: f64,
    /// Left edge of the first bin (s).
    pub t0: f64,
    pub counts: Vec<f64>,
    pub metadata: Option<HistogramMetadata>,
}

impl TimeHistogram {
    pub fn new(bin_width: f64, t0: f64, counts: Vec<f64>) -> Result<Self> {
        let h = Self {
            bin_width,
            t0,
            counts,
            metadata: None,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width.is_finite() && self.bin_width > 0.0) {
            return Err(Error::domain("bin_width", self.bin_width, "> 0 s"));
        }
        if !self.t0.is_finite() {
            return Err(Error::NonFinite("histogram origin".into()));
        }
        if self.counts.is_empty() {
            return Err(Error::InvalidParameter("histogram has no bins".into()));
        }
        if let Some(i) = self.counts.iter().position(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "bin {i} has invalid count {}",
                self.counts[i]
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        self.t0 + (i as f64 + 0.5) * self.bin_width
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.bin_center(i)).collect()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }
}

/// Leak and read peaks (Gaussian, signal width) plus flat background.
///
/// The leak carries `M (1 - eta)` and the retrieved pulse `M eta` counts,
/// with `M = repetitions * mean_photons * detection_efficiency` and `eta`
/// the decay model at the predicted storage time.
pub fn synthesize_histogram(
    seq: &PulseSequence,
    signal: &SignalPulseSpec,
    model: &StorageDecayModel,
    captured_fraction: f64,
    detection: &DetectionSettings,
    noise: NoiseMode,
    seed: u64,
) -> Result<TimeHistogram> {
    signal.validate()?;
    model.validate()?;
    detection.validate()?;
    if !(captured_fraction > 0.0 && captured_fraction <= 1.0) {
        return Err(Error::domain("captured_fraction", captured_fraction, "(0, 1]"));
    }
    if ((seq.signal_width - signal.width) / signal.width).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "signal width {:.4e} s differs from the sequence signal width {:.4e} s",
            signal.width, seq.signal_width
        )));
    }
    let bw = detection.bin_width;
    if bw > signal.width / 10.0 {
        return Err(Error::Resolution(format!(
            "bin width {bw:.3e} s exceeds a tenth of the signal width {:.3e} s",
            signal.width
        )));
    }
    let sigma = seq.signal_sigma();
    let t_storage = seq.predicted_storage();
    if t_storage < 4.0 * sigma {
        return Err(Error::Overlap(format!(
            "storage time {t_storage:.4e} s leaves leak and retrieved pulses overlapping (sigma {sigma:.4e} s)"
        )));
    }
    let eta = storage_efficiency(t_storage, model, captured_fraction);
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::ModelValidity(format!("programmed efficiency {eta} outside [0, 1]")));
    }

    let before = (14.0 * sigma / bw).ceil() as usize;
    let after = ((t_storage + 10.0 * sigma) / bw).ceil() as usize;
    let t0 = -(before as f64 + 0.5) * bw;
    let n_bins = before + after + 1;
    let photons = detection.repetitions as f64 * signal.mean_photons * detection.detection_efficiency;
    let leak_area = photons * (1.0 - eta);
    let read_area = photons * eta;
    let peak = |area: f64, center: f64, lo: f64| {
        area * normal_interval((lo - center) / sigma, (lo + bw - center) / sigma)
    };

    let mut rng = rng::stream(seed, "histogram", 0);
    let mut counts = Vec::with_capacity(n_bins);
    for i in 0..n_bins {
        let lo = t0 + i as f64 * bw;
        let mean = peak(leak_area, 0.0, lo) + peak(read_area, t_storage, lo) + detection.background_per_bin;
        counts.push(match noise {
            NoiseMode::Expectation => mean,
            NoiseMode::Poisson if mean > 0.0 => Poisson::new(mean)
                .map_err(|e| Error::NonFinite(format!("Poisson mean {mean}: {e}")))?
                .sample(&mut rng),
            NoiseMode::Poisson => 0.0,
        });
    }
    Ok(TimeHistogram {
        bin_width: bw,
        t0,
        counts,
        metadata: Some(HistogramMetadata {
            sequence: *seq,
            signal: *signal,
            model: *model,
            captured_fraction,
            detection: *detection,
            noise,
            seed,
            eta_programmed: eta,
            t_storage_programmed: t_storage,
        }),
    })
}
