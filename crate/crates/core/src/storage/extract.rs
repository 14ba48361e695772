use serde::{Deserialize, Serialize};

use super::{PulseSequence, TimeHistogram};
use crate::estimation::{fit_gaussian_peak, gaussian_bin_mean, normal_interval, LmSettings};
use crate::{Error, Result};

/// Temporal filter and peak-finding settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractionSettings {
    /// Counting window half width in units of the leak-pulse sigma
    /// (1.5 gives a total window of 3 sigma).
    pub window_half_width_sigmas: f64,
    /// Half width of the segment handed to each Gaussian fit.
    pub fit_half_width_sigmas: f64,
    /// Background is taken from bins this many sigmas before the leak.
    pub background_gap_sigmas: f64,
    /// Read-peak amplitude below this multiple of the background RMS (at
    /// least one count) is flagged as low confidence.
    pub detection_floor_rms: f64,
    /// A read fit whose sigma differs from the leak sigma by more than this
    /// factor (either way) is flagged as low confidence.
    pub max_width_ratio: f64,
    pub lm: LmSettings,
}

impl Default for ExtractionSettings {
    fn default() -> Self {
        Self {
            window_half_width_sigmas: 1.5,
            fit_half_width_sigmas: 4.0,
            background_gap_sigmas: 8.0,
            detection_floor_rms: 3.0,
            max_width_ratio: 2.0,
            lm: LmSettings::default(),
        }
    }
}

impl ExtractionSettings {
    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("window_half_width_sigmas", self.window_half_width_sigmas),
            ("fit_half_width_sigmas", self.fit_half_width_sigmas),
            ("background_gap_sigmas", self.background_gap_sigmas),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(what, v, "> 0"));
            }
        }
        if !(self.detection_floor_rms >= 0.0) {
            return Err(Error::domain("detection_floor_rms", self.detection_floor_rms, ">= 0"));
        }
        if !(self.max_width_ratio >= 1.0) {
            return Err(Error::domain("max_width_ratio", self.max_width_ratio, ">= 1"));
        }
        Ok(())
    }
}

/// Internal efficiency and timing read off one histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyResult {
    /// `n_read / (n_read + n_leak)`.
    pub eta_int: f64,
    /// Binomial standard error of `eta_int`.
    pub eta_uncertainty: f64,
    pub n_read: f64,
    pub n_leak: f64,
    /// Leak-to-read centre distance (s).
    pub t_storage_measured: f64,
    /// Fitted leak-pulse standard deviation (s).
    pub sigma_in: f64,
    /// `t_storage_measured / signal_width`.
    pub fractional_delay: f64,
    pub leak_center: f64,
    pub read_center: f64,
    /// Background estimate subtracted from each window (counts per bin).
    pub background_per_bin: f64,
    /// The read peak was not resolved; its window sits at the predicted time.
    pub low_confidence: bool,
    pub warnings: Vec<String>,
}

const NS: f64 = 1e-9;

struct Peak {
    center: f64,
    sigma: f64,
    amplitude: f64,
    warnings: Vec<String>,
}

/// Gaussian fit on bins within `half` of `around` (times in seconds), with
/// the tail of a previously fitted `other` peak removed first.
fn fit_segment(
    hist: &TimeHistogram,
    around: f64,
    half: f64,
    other: Option<&Peak>,
    lm: &LmSettings,
) -> Result<Peak> {
    let bw = hist.bin_width / NS;
    let mut t = Vec::new();
    let mut c = Vec::new();
    for (i, &v) in hist.counts.iter().enumerate() {
        let x = hist.bin_center(i);
        if (x - around).abs() <= half {
            // nanoseconds keep the fit well scaled
            let x = x / NS;
            let tail = other.map_or(0.0, |o| {
                gaussian_bin_mean(x, bw, o.center / NS, o.sigma / NS, o.amplitude, 0.0)
            });
            t.push(x);
            c.push(v - tail);
        }
    }
    let fit = fit_gaussian_peak(&t, &c, bw, lm)?;
    Ok(Peak {
        center: fit.estimates[0] * NS,
        sigma: fit.estimates[1] * NS,
        amplitude: fit.estimates[2],
        warnings: fit.warnings,
    })
}

/// Background-subtracted counts in `center +- half_width`, edge bins
/// apportioned by a Gaussian profile of width `sigma`.
fn window_counts(hist: &TimeHistogram, center: f64, sigma: f64, half_width: f64, background: f64) -> f64 {
    let (wlo, whi) = (center - half_width, center + half_width);
    let mut sum = 0.0;
    for (i, &v) in hist.counts.iter().enumerate() {
        let lo = hist.t0 + i as f64 * hist.bin_width;
        let hi = lo + hist.bin_width;
        let (a, b) = (lo.max(wlo), hi.min(whi));
        if b <= a {
            continue;
        }
        let whole = normal_interval((lo - center) / sigma, (hi - center) / sigma);
        let part = normal_interval((a - center) / sigma, (b - center) / sigma);
        let frac = if whole > 1e-300 {
            part / whole
        } else {
            (b - a) / hist.bin_width
        };
        sum += (v - background) * frac;
    }
    sum
}

/// Fit the leak and retrieved peaks and count photons in a window of
/// `+- window_half_width_sigmas` leak sigmas around each.
///
/// A missing leak peak is an error; a missing retrieved peak only sets
/// `low_confidence` and counts at the predicted position.
pub fn extract_efficiency(
    hist: &TimeHistogram,
    seq: &PulseSequence,
    settings: &ExtractionSettings,
) -> Result<EfficiencyResult> {
    hist.validate()?;
    settings.validate()?;
    let predicted = seq.predicted_storage();
    let sigma_pred = seq.signal_sigma();
    let mut warnings = Vec::new();

    let centers = hist.bin_centers();
    let leak_guess = centers
        .iter()
        .zip(&hist.counts)
        .filter(|(t, _)| **t < 0.5 * predicted)
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.total_cmp(a.0)))
        .map(|(t, _)| *t)
        .ok_or_else(|| Error::NotFound("no bins before the expected retrieval".into()))?;
    let leak_half = settings.fit_half_width_sigmas * sigma_pred;
    let mut leak = fit_segment(hist, leak_guess, leak_half, None, &settings.lm)
        .map_err(|e| Error::NotFound(format!("leak peak: {e}")))?;

    let quiet: Vec<f64> = centers
        .iter()
        .zip(&hist.counts)
        .filter(|(t, _)| **t < leak.center - settings.background_gap_sigmas * leak.sigma)
        .map(|(_, c)| *c)
        .collect();
    let (background, rms) = if quiet.is_empty() {
        warnings.push("no bins ahead of the leak pulse; background taken as zero".into());
        (0.0, 0.0)
    } else {
        let m = quiet.iter().sum::<f64>() / quiet.len() as f64;
        let v = quiet.iter().map(|c| (c - m).powi(2)).sum::<f64>() / quiet.len() as f64;
        (m, v.sqrt())
    };

    let read_guess = leak.center + predicted;
    let half = settings.fit_half_width_sigmas * leak.sigma;
    // an empty background still fluctuates by about one count
    let floor = settings.detection_floor_rms * rms.max(1.0);
    let ratio = settings.max_width_ratio;
    let accept = |p: &Peak, width: f64| {
        p.amplitude > floor
            && (p.center - read_guess).abs() <= 0.5 * half
            && p.sigma <= ratio * width
            && p.sigma * ratio >= width
    };
    let mut read = fit_segment(hist, read_guess, half, Some(&leak), &settings.lm);
    if let Ok(r) = read.as_ref().map_err(|_| ()).and_then(|r| if accept(r, leak.sigma) { Ok(r) } else { Err(()) }) {
        // second pass with the retrieved tail removed from the leak segment
        leak = fit_segment(hist, leak.center, leak_half, Some(r), &settings.lm)
            .map_err(|e| Error::NotFound(format!("leak peak: {e}")))?;
        read = fit_segment(hist, read_guess, half, Some(&leak), &settings.lm);
    }
    warnings.extend(leak.warnings.iter().map(|w| format!("leak fit: {w}")));
    let sigma_in = leak.sigma;
    let (read_center, low_confidence) = match read {
        Ok(p) if accept(&p, sigma_in) => {
            warnings.extend(p.warnings.iter().map(|w| format!("read fit: {w}")));
            (p.center, false)
        }
        Ok(p) => {
            warnings.push(format!(
                "read peak (amplitude {:.3}, sigma {:.3e} s) below the detection floor {floor:.3}, \
                 off position or of implausible width",
                p.amplitude, p.sigma
            ));
            (read_guess, true)
        }
        Err(e) => {
            warnings.push(format!("read peak not resolved: {e}"));
            (read_guess, true)
        }
    };

    let w = settings.window_half_width_sigmas * sigma_in;
    let n_leak = window_counts(hist, leak.center, sigma_in, w, background).max(0.0);
    let n_read = window_counts(hist, read_center, sigma_in, w, background).max(0.0);
    let total = n_read + n_leak;
    if !(total > 0.0) {
        return Err(Error::NotFound("no counts inside the leak and read windows".into()));
    }
    let eta_int = n_read / total;
    let p = eta_int.clamp(1.0 / total, 1.0 - 1.0 / total);
    let t_storage_measured = read_center - leak.center;
    Ok(EfficiencyResult {
        eta_int,
        eta_uncertainty: (p * (1.0 - p) / total).max(0.0).sqrt(),
        n_read,
        n_leak,
        t_storage_measured,
        sigma_in,
        fractional_delay: t_storage_measured / seq.signal_width,
        leak_center: leak.center,
        read_center,
        background_per_bin: background,
        low_confidence,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{
        synthesize_histogram, storage_efficiency, DetectionSettings, NoiseMode, SignalPulseSpec,
        StorageDecayModel, DEFAULT_RETRIEVAL_LEAD,
    };
    use super::*;
    use std::f64::consts::PI;

    fn seq() -> PulseSequence {
        PulseSequence::for_signal_width(14.1e-9, 90e-9, DEFAULT_RETRIEVAL_LEAD).unwrap()
    }

    fn synth(model: &StorageDecayModel, noise: NoiseMode, seed: u64) -> TimeHistogram {
        synthesize_histogram(
            &seq(),
            &SignalPulseSpec::default(),
            model,
            1.0,
            &DetectionSettings::default(),
            noise,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn constructed_ratio() {
        // leak 900, read 100 on a hand-made histogram
        let s = seq();
        let sigma = s.signal_sigma();
        let bw = 0.25e-9;
        let t0 = -100e-9;
        let counts = (0..800)
            .map(|i| {
                let lo = t0 + i as f64 * bw;
                let g = |c: f64, a: f64| a * normal_interval((lo - c) / sigma, (lo + bw - c) / sigma);
                g(0.0, 900.0) + g(s.predicted_storage(), 100.0)
            })
            .collect();
        let h = TimeHistogram::new(bw, t0, counts).unwrap();
        let r = extract_efficiency(&h, &s, &Default::default()).unwrap();
        assert!((r.eta_int - 0.1).abs() < 1e-6);
        assert!((r.eta_int - r.n_read / (r.n_read + r.n_leak)).abs() < 1e-12);
    }

    #[test]
    fn noiseless_round_trip() {
        let m = StorageDecayModel::default();
        let h = synth(&m, NoiseMode::Expectation, 0);
        let r = extract_efficiency(&h, &seq(), &Default::default()).unwrap();
        assert!(!r.low_confidence);
        assert!(((r.eta_int - 0.0982) / 0.0982).abs() < 1e-6, "{r:?}");
        assert!((r.t_storage_measured - 52.37e-9).abs() < 0.5e-9);
        assert!((r.fractional_delay - 3.714).abs() < 0.01);
        assert!((r.sigma_in - 14.1e-9 / 2.354_820_045).abs() < 1e-12);
    }

    #[test]
    fn empty_memory_gives_zero() {
        let m = StorageDecayModel {
            eta0: 0.0,
            ..Default::default()
        };
        let r = extract_efficiency(&synth(&m, NoiseMode::Poisson, 5), &seq(), &Default::default()).unwrap();
        assert_eq!(r.eta_int, 0.0);
        assert!(r.low_confidence);
    }

    #[test]
    fn zero_of_precession() {
        // sin(omega t / 2 + phi) = 0 at the predicted storage time
        let t = seq().predicted_storage();
        let m = StorageDecayModel {
            phi: PI - 0.5 * StorageDecayModel::default().omega * t,
            ..Default::default()
        };
        assert!(storage_efficiency(t, &m, 1.0) < 1e-20);
        let r = extract_efficiency(&synth(&m, NoiseMode::Expectation, 0), &seq(), &Default::default()).unwrap();
        assert!(r.eta_int < 1e-9);
    }

    #[test]
    fn wider_filter_changes_little() {
        let h = synth(&StorageDecayModel::default(), NoiseMode::Expectation, 0);
        let a = extract_efficiency(&h, &seq(), &Default::default()).unwrap();
        let wide = ExtractionSettings {
            window_half_width_sigmas: 3.0,
            ..Default::default()
        };
        let b = extract_efficiency(&h, &seq(), &wide).unwrap();
        assert!(((a.eta_int - b.eta_int) / a.eta_int).abs() < 0.02);
    }

    #[test]
    fn background_is_subtracted() {
        let d = DetectionSettings {
            background_per_bin: 3.0,
            ..Default::default()
        };
        let h = synthesize_histogram(
            &seq(),
            &SignalPulseSpec::default(),
            &StorageDecayModel::default(),
            1.0,
            &d,
            NoiseMode::Expectation,
            0,
        )
        .unwrap();
        let r = extract_efficiency(&h, &seq(), &Default::default()).unwrap();
        assert!((r.background_per_bin - 3.0).abs() < 1e-9);
        assert!(((r.eta_int - 0.0982) / 0.0982).abs() < 1e-6);
    }

    #[test]
    fn missing_leak_is_an_error() {
        let h = TimeHistogram::new(0.5e-9, -50e-9, vec![0.0; 400]).unwrap();
        assert!(matches!(
            extract_efficiency(&h, &seq(), &Default::default()),
            Err(Error::NotFound(_))
        ));
    }
}
