use std::f64::consts::{PI, SQRT_2};

use errorfunctions::RealErrorFunctions;

use super::{minimize, FitProblem, FitResult, LmSettings, ModelId, ParameterSpec};
use crate::{Error, Result};

/// Runs-test z-score below which residuals are flagged as structured.
pub(crate) const RUNS_TEST_LIMIT: f64 = -3.0;

/// `P(a < Z < b)` for a standard normal `Z`, accurate in both tails.
pub(crate) fn normal_interval(a: f64, b: f64) -> f64 {
    let erf = RealErrorFunctions::erf;
    let erfc = RealErrorFunctions::erfc;
    if a >= 0.0 {
        0.5 * (erfc(a / SQRT_2) - erfc(b / SQRT_2))
    } else if b <= 0.0 {
        0.5 * (erfc(-b / SQRT_2) - erfc(-a / SQRT_2))
    } else {
        0.5 * (erf(b / SQRT_2) - erf(a / SQRT_2))
    }
}

/// Expected counts in a bin of width `bin_width` centred at `t` for a
/// Gaussian of peak height `amplitude` (counts per bin) on a flat baseline.
/// With `bin_width == 0` the profile is sampled at `t`.
pub fn gaussian_bin_mean(
    t: f64,
    bin_width: f64,
    center: f64,
    sigma: f64,
    amplitude: f64,
    baseline: f64,
) -> f64 {
    if bin_width == 0.0 {
        let u = (t - center) / sigma;
        return amplitude * (-0.5 * u * u).exp() + baseline;
    }
    let a = (t - 0.5 * bin_width - center) / sigma;
    let b = (t + 0.5 * bin_width - center) / sigma;
    amplitude * (2.0 * PI).sqrt() * sigma / bin_width * normal_interval(a, b) + baseline
}

/// Wald-Wolfowitz runs-test z-score of the residual signs (zeros skipped).
/// Strongly negative values mean long same-sign runs, i.e. unmodeled shape.
pub fn runs_test_z(residuals: &[f64]) -> f64 {
    let signs: Vec<bool> = residuals.iter().filter(|r| **r != 0.0).map(|r| *r > 0.0).collect();
    let n1 = signs.iter().filter(|s| **s).count() as f64;
    let n2 = signs.len() as f64 - n1;
    let n = n1 + n2;
    if n1 == 0.0 || n2 == 0.0 || n < 3.0 {
        return 0.0;
    }
    let runs = 1.0 + signs.windows(2).filter(|w| w[0] != w[1]).count() as f64;
    let mean = 2.0 * n1 * n2 / n + 1.0;
    let var = 2.0 * n1 * n2 * (2.0 * n1 * n2 - n) / (n * n * (n - 1.0));
    if var <= 0.0 {
        return 0.0;
    }
    (runs - mean) / var.sqrt()
}

/// Poisson-weighted fit of a Gaussian peak on a flat baseline to binned
/// counts. Parameters: `center`, `sigma`, `amplitude` (peak counts per bin)
/// and `baseline` (counts per bin).
///
/// `t` holds bin centres; `bin_width` is used for the bin-integrated model.
/// The fit is refused when the peak does not rise at least five baseline
/// RMS above the segment edges.
pub fn fit_gaussian_peak(
    t: &[f64],
    counts: &[f64],
    bin_width: f64,
    settings: &LmSettings,
) -> Result<FitResult> {
    if t.len() != counts.len() {
        return Err(Error::InvalidParameter("times and counts differ in length".into()));
    }
    if t.len() < 6 {
        return Err(Error::NotFound(format!(
            "peak segment has only {} bins",
            t.len()
        )));
    }
    if !(bin_width >= 0.0) {
        return Err(Error::domain("bin_width", bin_width, ">= 0 s"));
    }
    let n = t.len();
    let edge = (n * 15 / 100).max(2);
    let edges: Vec<f64> = counts[..edge].iter().chain(&counts[n - edge..]).copied().collect();
    let base = edges.iter().sum::<f64>() / edges.len() as f64;
    let rms = (edges.iter().map(|c| (c - base).powi(2)).sum::<f64>() / edges.len() as f64).sqrt();
    let (imax, &cmax) = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("non-empty segment");
    let height = cmax - base;
    if !(height > 0.0 && height >= 5.0 * rms) {
        return Err(Error::NotFound(format!(
            "peak height {height:.3} is below 5x the baseline RMS {rms:.3}"
        )));
    }

    let step = if bin_width > 0.0 {
        bin_width
    } else {
        (t[n - 1] - t[0]) / (n - 1) as f64
    };
    let span = t[n - 1] - t[0];
    let excess: f64 = counts.iter().map(|c| (c - base).max(0.0)).sum::<f64>() * step;
    let sigma_lo = (step / 20.0).max(span * 1e-6);
    let sigma0 = (excess / (height * (2.0 * PI).sqrt())).clamp(sigma_lo, span);
    let params = vec![
        ParameterSpec::new("center", t[imax], t[0], t[n - 1]),
        ParameterSpec::new("sigma", sigma0, sigma_lo, span),
        ParameterSpec::new("amplitude", height, 0.0, 4.0 * (cmax + 1.0)),
        ParameterSpec::new("baseline", base.clamp(-(cmax + 1.0), cmax), -(cmax + 1.0), cmax),
    ];
    let sigma: Vec<f64> = counts.iter().map(|c| c.max(1.0).sqrt()).collect();
    let xs = t.to_vec();
    let problem = FitProblem::new(
        ModelId::GaussianPeak,
        params,
        t.to_vec(),
        counts.to_vec(),
        sigma,
        move |p| {
            Ok(xs
                .iter()
                .map(|&ti| gaussian_bin_mean(ti, bin_width, p[0], p[1], p[2], p[3]))
                .collect())
        },
    )?;
    let mut fit = minimize(&problem, &problem.initial(), settings)?;
    let z = runs_test_z(&problem.residuals(&fit.estimates)?);
    fit.derived.insert("runs_test_z".into(), z);
    if z < RUNS_TEST_LIMIT {
        fit.warnings.push(format!(
            "residual runs test z = {z:.2}: segment may contain more than one peak"
        ));
    }
    Ok(fit)
}
