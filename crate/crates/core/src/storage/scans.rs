use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    extract_efficiency, storage_efficiency, synthesize_histogram, DetectionSettings, EfficiencyResult,
    ExtractionSettings, NoiseMode, PulseSequence, SignalPulseSpec, StorageDecayModel, TimeHistogram,
    DEFAULT_RETRIEVAL_LEAD,
};
use crate::eit::{group_velocity_on_resonance, ControlDrive, EitSettings, Medium, WaveguideSpec};
use crate::estimation::{fit_lifetime, LifetimeFitSettings};
use crate::{rng, Error, Result};

/// Fixed ingredients of one storage experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StorageSetup {
    pub signal: SignalPulseSpec,
    pub model: StorageDecayModel,
    /// Capture fraction applied to the decay model (scans that vary the
    /// pulse width recompute it).
    pub captured_fraction: f64,
    pub retrieval_lead: f64,
    pub detection: DetectionSettings,
    pub noise: NoiseMode,
    pub extraction: ExtractionSettings,
}

impl Default for StorageSetup {
    fn default() -> Self {
        Self {
            signal: SignalPulseSpec::default(),
            model: StorageDecayModel::default(),
            captured_fraction: 1.0,
            retrieval_lead: DEFAULT_RETRIEVAL_LEAD,
            detection: DetectionSettings::default(),
            noise: NoiseMode::Poisson,
            extraction: ExtractionSettings::default(),
        }
    }
}

/// Histogram and extracted efficiency of one write-store-read run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageRun {
    pub sequence: PulseSequence,
    pub histogram: TimeHistogram,
    pub efficiency: EfficiencyResult,
}

impl StorageSetup {
    /// Synthesize and analyse one histogram at `set_storage` with the setup's
    /// signal width.
    pub fn run(&self, set_storage: f64, seed: u64) -> Result<StorageRun> {
        let seq = PulseSequence::for_signal_width(self.signal.width, set_storage, self.retrieval_lead)?;
        self.run_sequence(&seq, self.captured_fraction, seed)
    }

    fn run_sequence(&self, seq: &PulseSequence, captured_fraction: f64, seed: u64) -> Result<StorageRun> {
        let signal = SignalPulseSpec {
            width: seq.signal_width,
            ..self.signal
        };
        let histogram = synthesize_histogram(
            seq,
            &signal,
            &self.model,
            captured_fraction,
            &self.detection,
            self.noise,
            seed,
        )?;
        let efficiency = extract_efficiency(&histogram, seq, &self.extraction)?;
        Ok(StorageRun {
            sequence: *seq,
            histogram,
            efficiency,
        })
    }
}

/// One point of an efficiency curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub set_storage: f64,
    pub signal_width: f64,
    pub captured_fraction: f64,
    /// Measured leak-to-read time (s).
    pub t_storage: f64,
    pub eta: f64,
    pub eta_uncertainty: f64,
    /// Model efficiency at the predicted storage time.
    pub eta_programmed: f64,
    pub low_confidence: bool,
    /// Child seed of this point.
    pub seed: u64,
}

impl CurvePoint {
    fn from_run(run: &StorageRun, captured_fraction: f64, seed: u64) -> Self {
        let e = &run.efficiency;
        Self {
            set_storage: run.sequence.set_storage,
            signal_width: run.sequence.signal_width,
            captured_fraction,
            t_storage: e.t_storage_measured,
            eta: e.eta_int,
            eta_uncertainty: e.eta_uncertainty,
            eta_programmed: run
                .histogram
                .metadata
                .as_ref()
                .map_or(f64::NAN, |m| m.eta_programmed),
            low_confidence: e.low_confidence,
            seed,
        }
    }
}

/// Efficiency against storage time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyCurve {
    pub points: Vec<CurvePoint>,
}

impl EfficiencyCurve {
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t_storage).collect()
    }

    pub fn etas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.eta).collect()
    }

    pub fn uncertainties(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.eta_uncertainty).collect()
    }
}

fn check_ascending(what: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidParameter(format!("{what} is empty")));
    }
    if v.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(format!("{what} must be strictly ascending")));
    }
    Ok(())
}

/// Efficiency at each set storage time; point `i` draws from the child
/// stream `(seed, "lifetime", i)`.
pub fn lifetime_scan(setup: &StorageSetup, set_times: &[f64], seed: u64) -> Result<EfficiencyCurve> {
    check_ascending("set storage times", set_times)?;
    let points = set_times
        .par_iter()
        .enumerate()
        .map(|(i, &t_set)| {
            let s = rng::derive_seed(seed, "lifetime", i as u64);
            let run = setup.run(t_set, s)?;
            Ok(CurvePoint::from_run(&run, setup.captured_fraction, s))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EfficiencyCurve { points })
}

/// Spatial extent of a slow pulse against the length available in the cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptureModel {
    pub group_velocity: f64,
    pub cell_length: f64,
}

impl CaptureModel {
    /// `min(1, cell_length / (v_g * width))`.
    pub fn captured_fraction(&self, width: f64) -> f64 {
        (self.cell_length / (self.group_velocity * width)).min(1.0)
    }
}

/// Slow-light inputs shared by the scans that recompute the capture fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowLightContext {
    pub waveguide: WaveguideSpec,
    pub medium: Medium,
    pub drive: ControlDrive,
    pub eit: EitSettings,
}

impl SlowLightContext {
    pub fn capture(&self) -> Result<CaptureModel> {
        // the group velocity does not depend on the pulse width
        let r = group_velocity_on_resonance(&self.waveguide, &self.drive, &self.medium, &self.eit, 1e-9)?;
        Ok(CaptureModel {
            group_velocity: r.group_velocity,
            cell_length: self.waveguide.cell_length,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthPoint {
    pub signal_width: f64,
    pub control_width: f64,
    pub point: CurvePoint,
}

/// Efficiency against signal width and the -3 dB bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthScan {
    pub points: Vec<BandwidthPoint>,
    pub set_storage: f64,
    pub group_velocity: f64,
    /// Signal width where the efficiency falls to -3 dB of its maximum.
    pub crossing_width: f64,
    /// `1 / crossing_width` (Hz).
    pub bandwidth_hz: f64,
}

/// Power ratio of -3 dB.
pub const MINUS_3_DB: f64 = 0.501_187_233_627_272_2;

/// Efficiency per signal width at a fixed set storage time, with the control
/// width kept at 1.5 signal widths and the capture fraction recomputed per
/// width. Point `i` draws from `(seed, "bandwidth", i)`.
pub fn bandwidth_curve(
    setup: &StorageSetup,
    capture: &CaptureModel,
    widths: &[f64],
    set_storage: f64,
    seed: u64,
) -> Result<Vec<BandwidthPoint>> {
    check_ascending("signal widths", widths)?;
    if !(capture.group_velocity > 0.0 && capture.cell_length > 0.0) {
        return Err(Error::domain("group_velocity", capture.group_velocity, "> 0 m/s"));
    }
    widths
        .par_iter()
        .enumerate()
        .map(|(i, &w)| {
            let s = rng::derive_seed(seed, "bandwidth", i as u64);
            let seq = PulseSequence::for_signal_width(w, set_storage, setup.retrieval_lead)?;
            let cf = capture.captured_fraction(w);
            let run = setup.run_sequence(&seq, cf, s)?;
            Ok(BandwidthPoint {
                signal_width: w,
                control_width: seq.control_width,
                point: CurvePoint::from_run(&run, cf, s),
            })
        })
        .collect()
}

/// Width where `eta` first falls to -3 dB of its maximum, by linear
/// interpolation between the bracketing points. The search runs from the
/// maximum toward longer widths, then toward shorter ones.
pub fn bandwidth_crossing(widths: &[f64], eta: &[f64]) -> Result<f64> {
    if widths.len() != eta.len() || widths.len() < 2 {
        return Err(Error::InvalidParameter("bandwidth curve needs at least two points".into()));
    }
    let (imax, &emax) = eta
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("non-empty");
    if !(emax > 0.0) {
        return Err(Error::BandwidthUndetermined("efficiency is zero at every width".into()));
    }
    let level = MINUS_3_DB * emax;
    let interp = |a: usize, b: usize| {
        let f = (eta[a] - level) / (eta[a] - eta[b]);
        widths[a] + f * (widths[b] - widths[a])
    };
    if let Some(j) = (imax + 1..eta.len()).find(|&j| eta[j] <= level) {
        return Ok(interp(j - 1, j));
    }
    if let Some(j) = (0..imax).rev().find(|&j| eta[j] <= level) {
        return Ok(interp(j + 1, j));
    }
    Err(Error::BandwidthUndetermined(format!(
        "efficiency stays above -3 dB of its maximum {emax:.4e} over widths {:.3e}..{:.3e} s",
        widths[0],
        widths[widths.len() - 1]
    )))
}

pub fn bandwidth_scan(
    setup: &StorageSetup,
    capture: &CaptureModel,
    widths: &[f64],
    set_storage: f64,
    seed: u64,
) -> Result<BandwidthScan> {
    let points = bandwidth_curve(setup, capture, widths, set_storage, seed)?;
    let eta: Vec<f64> = points.iter().map(|p| p.point.eta).collect();
    let crossing_width = bandwidth_crossing(widths, &eta)?;
    Ok(BandwidthScan {
        points,
        set_storage,
        group_velocity: capture.group_velocity,
        crossing_width,
        bandwidth_hz: 1.0 / crossing_width,
    })
}

/// Relative standard deviations of the per-channel parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JitterSpec {
    pub omega0: f64,
    pub attenuation: f64,
    pub coupling_efficiency: f64,
}

impl Default for JitterSpec {
    fn default() -> Self {
        Self {
            omega0: 0.005,
            attenuation: 0.005,
            coupling_efficiency: 0.005,
        }
    }
}

impl JitterSpec {
    pub fn none() -> Self {
        Self {
            omega0: 0.0,
            attenuation: 0.0,
            coupling_efficiency: 0.0,
        }
    }
}

/// Inputs of a multi-channel run. `storage.model.eta0` refers to the
/// nominal coupling efficiency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplexSetup {
    pub storage: StorageSetup,
    pub slow_light: SlowLightContext,
    pub set_times: Vec<f64>,
    pub fit: LifetimeFitSettings,
    pub jitter: JitterSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelResult {
    pub index: usize,
    pub omega0_factor: f64,
    pub attenuation_factor: f64,
    pub coupling_factor: f64,
    pub group_velocity: f64,
    pub captured_fraction: f64,
    pub eta0: f64,
    pub curve: EfficiencyCurve,
    pub t_mem: f64,
    pub t_mem_std_error: f64,
    /// Expanded uncertainty (coverage factor of the fit).
    pub t_mem_uncertainty: f64,
    pub frequency_hz: f64,
    pub fit_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplexResult {
    pub channels: Vec<ChannelResult>,
    /// Largest `|t_mem,a - t_mem,b|` over channel pairs.
    pub max_pairwise_difference: f64,
    /// Quadrature sum of the expanded uncertainties of that pair.
    pub combined_uncertainty: f64,
    /// Indices of that pair.
    pub worst_pair: (usize, usize),
    pub consistent: bool,
    pub seed: u64,
}

fn factor(rng: &mut rand_chacha::ChaCha8Rng, rel: f64) -> Result<f64> {
    let e: f64 = StandardNormal.sample(rng);
    let f = 1.0 + rel * e;
    if !(f > 0.0) {
        return Err(Error::domain("jitter factor", f, "> 0"));
    }
    Ok(f)
}

/// Independent channels with jittered drive, loss and coupling: each runs a
/// lifetime scan and a lifetime fit. Channel `k` draws its parameters from
/// `(seed, "multiplex-jitter", k)` and its histograms from the child root
/// `(seed, "multiplex-channel", k)`.
pub fn multiplex_ensemble(setup: &MultiplexSetup, n_channels: usize, seed: u64) -> Result<MultiplexResult> {
    if n_channels < 2 {
        return Err(Error::InvalidParameter(format!(
            "multiplexing needs at least 2 channels, got {n_channels}"
        )));
    }
    let j = setup.jitter;
    for (what, v) in [
        ("omega0 jitter", j.omega0),
        ("attenuation jitter", j.attenuation),
        ("coupling jitter", j.coupling_efficiency),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::domain(what, v, ">= 0"));
        }
    }
    let channels = (0..n_channels)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::stream(seed, "multiplex-jitter", k as u64);
            let fo = factor(&mut r, j.omega0)?;
            let fa = factor(&mut r, j.attenuation)?;
            let fc = factor(&mut r, j.coupling_efficiency)?;
            let mut ctx = setup.slow_light.clone();
            ctx.drive.omega0 *= fo;
            ctx.waveguide.attenuation_db_per_mm *= fa;
            ctx.waveguide.coupling_efficiency = (ctx.waveguide.coupling_efficiency * fc).min(1.0);
            let capture = ctx.capture()?;
            let cf = capture.captured_fraction(setup.storage.signal.width);
            let eta0 = (setup.storage.model.eta0 * fc).min(1.0);
            let storage = StorageSetup {
                captured_fraction: cf,
                model: StorageDecayModel {
                    eta0,
                    ..setup.storage.model
                },
                ..setup.storage
            };
            let child = rng::derive_seed(seed, "multiplex-channel", k as u64);
            let curve = lifetime_scan(&storage, &setup.set_times, child)?;
            let fit = fit_lifetime(&curve.times(), &curve.etas(), &curve.uncertainties(), &setup.fit)?;
            Ok(ChannelResult {
                index: k,
                omega0_factor: fo,
                attenuation_factor: fa,
                coupling_factor: fc,
                group_velocity: capture.group_velocity,
                captured_fraction: cf,
                eta0,
                curve,
                t_mem: fit.estimates[0],
                t_mem_std_error: fit.std_errors[0],
                t_mem_uncertainty: fit.uncertainties[0],
                frequency_hz: fit.derived.get("frequency_hz").copied().unwrap_or(f64::NAN),
                fit_converged: fit.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let pair = |a: usize, b: usize| {
        let (x, y) = (&channels[a], &channels[b]);
        ((x.t_mem - y.t_mem).abs(), x.t_mem_uncertainty.hypot(y.t_mem_uncertainty), (a, b))
    };
    let mut worst = pair(0, 1);
    for a in 0..channels.len() {
        for b in a + 1..channels.len() {
            let c = pair(a, b);
            if c.0 > worst.0 {
                worst = c;
            }
        }
    }
    Ok(MultiplexResult {
        channels,
        max_pairwise_difference: worst.0,
        combined_uncertainty: worst.1,
        worst_pair: worst.2,
        consistent: worst.0 <= worst.1,
        seed,
    })
}

/// Efficiency of the decay model at each measured time of `curve`.
pub fn model_at_measured_times(curve: &EfficiencyCurve, model: &StorageDecayModel) -> Vec<f64> {
    curve
        .points
        .iter()
        .map(|p| storage_efficiency(p.t_storage, model, p.captured_fraction))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    // from 90 ns the leak tail inside the read window is below 1e-11
    fn set_times() -> Vec<f64> {
        (0..40).map(|i| 90e-9 + 10e-9 * i as f64).collect()
    }

    #[test]
    fn noiseless_curve_follows_model() {
        let setup = StorageSetup {
            noise: NoiseMode::Expectation,
            ..Default::default()
        };
        let curve = lifetime_scan(&setup, &set_times(), 1).unwrap();
        let model = model_at_measured_times(&curve, &setup.model);
        for (p, m) in curve.points.iter().zip(model) {
            assert!((p.eta - m).abs() < 1e-10, "{} vs {m} at {}", p.eta, p.t_storage);
            assert!(p.eta <= setup.model.eta0 * setup.captured_fraction);
        }
    }

    #[test]
    fn constant_set_minus_measured_offset() {
        let setup = StorageSetup {
            noise: NoiseMode::Expectation,
            ..Default::default()
        };
        let curve = lifetime_scan(&setup, &set_times(), 1).unwrap();
        let offsets: Vec<f64> = curve
            .points
            .iter()
            .filter(|p| !p.low_confidence)
            .map(|p| p.set_storage - p.t_storage)
            .collect();
        let lo = offsets.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = offsets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(hi - lo < setup.detection.bin_width);
    }

    #[test]
    fn crossing_found_on_both_sides() {
        let w = [1.0, 2.0, 3.0, 4.0];
        assert!((bandwidth_crossing(&w, &[1.0, 0.8, 0.4, 0.2]).unwrap() - (2.0 + (0.8 - MINUS_3_DB) / 0.4)).abs() < 1e-12);
        assert!((bandwidth_crossing(&w, &[0.2, 0.4, 0.8, 1.0]).unwrap() - (3.0 - (0.8 - MINUS_3_DB) / 0.4)).abs() < 1e-12);
        assert!(matches!(
            bandwidth_crossing(&w, &[1.0, 0.9, 0.8, 0.7]),
            Err(Error::BandwidthUndetermined(_))
        ));
    }

    #[test]
    fn bandwidth_from_capture() {
        let setup = StorageSetup {
            noise: NoiseMode::Expectation,
            model: StorageDecayModel {
                omega: 0.0,
                ..Default::default()
            },
            ..Default::default()
        };
        let widths: Vec<f64> = (0..30).map(|i| 5e-9 + 1e-9 * i as f64).collect();
        let slow = CaptureModel {
            group_velocity: 5e5,
            cell_length: 5e-3,
        };
        let fast = CaptureModel {
            group_velocity: 1e6,
            ..slow
        };
        let a = bandwidth_scan(&setup, &slow, &widths, 150e-9, 0).unwrap();
        let b = bandwidth_scan(&setup, &fast, &widths, 150e-9, 0).unwrap();
        assert!(b.bandwidth_hz > a.bandwidth_hz);
        // short widths are fully captured, so faster light stores less only
        // beyond the capture limit
        assert!(b.points[20].point.eta < a.points[20].point.eta);
    }
}
