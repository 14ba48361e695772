use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{minimize, FitProblem, FitResult, LmSettings, ModelId, ParameterSpec};
use crate::{Error, Result};

/// Damped precession `eta0 exp(-t / t_mem) sin^2(omega t / 2 + phi)`.
pub fn lifetime_model(t: f64, t_mem: f64, omega: f64, phi: f64, eta0: f64) -> f64 {
    eta0 * (-t / t_mem).exp() * (0.5 * omega * t + phi).sin().powi(2)
}

/// Settings of the multi-start lifetime fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LifetimeFitSettings {
    pub lm: LmSettings,
    /// Phase starts `k pi / 4` for `k < phase_starts`.
    pub phase_starts: usize,
    /// Frequency nodes of the coarse profile scan used for the start value.
    pub frequency_grid: usize,
    /// Lifetime nodes (log spaced) of the coarse profile scan.
    pub lifetime_grid: usize,
}

impl Default for LifetimeFitSettings {
    fn default() -> Self {
        Self {
            lm: LmSettings::default(),
            phase_starts: 8,
            frequency_grid: 240,
            lifetime_grid: 24,
        }
    }
}

/// Best `eta0` for a fixed shape by weighted linear least squares.
fn best_scale(shape: &[f64], y: &[f64], w: &[f64]) -> (f64, f64) {
    let mut sy = 0.0;
    let mut ss = 0.0;
    for ((s, yi), wi) in shape.iter().zip(y).zip(w) {
        sy += wi * s * yi;
        ss += wi * s * s;
    }
    let scale = if ss > 0.0 { (sy / ss).clamp(0.0, 1.0) } else { 0.0 };
    let loss = shape
        .iter()
        .zip(y)
        .zip(w)
        .map(|((s, yi), wi)| wi * (yi - scale * s).powi(2))
        .sum();
    (scale, loss)
}

/// Parameters of the lifetime fit for samples at times `t` (ascending):
/// `t_mem` within two decades of the sampled span, `omega` up to the
/// sampling limit `pi / min_step`, `phi` in `[-pi, 2 pi]`, `eta0` in
/// `[0, 1]`. Start values are clamped into their bounds.
pub fn lifetime_parameters(t: &[f64], start: [f64; 4]) -> Vec<ParameterSpec> {
    let span = t[t.len() - 1] - t[0];
    let min_step = t.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let specs = vec![
        ParameterSpec::new("t_mem", start[0], span / 100.0, 100.0 * span),
        ParameterSpec::new("omega", start[1], 0.0, PI / min_step),
        ParameterSpec::new("phi", start[2], -PI, 2.0 * PI),
        ParameterSpec::new("eta0", start[3], 0.0, 1.0),
    ];
    specs
        .into_iter()
        .map(|p| ParameterSpec {
            initial: p.clamp(p.initial),
            ..p
        })
        .collect()
}

/// Fit of the damped-precession model over `t_mem`, `omega`, `phi`, `eta0`.
///
/// A coarse profile scan over frequency and lifetime provides the start,
/// then one optimization runs from each phase start `k pi / 4`. The lowest
/// loss wins; equal losses keep the lowest starting phase.
pub fn fit_lifetime(
    t: &[f64],
    eta: &[f64],
    sigma: &[f64],
    settings: &LifetimeFitSettings,
) -> Result<FitResult> {
    let n = t.len();
    if n < 8 {
        return Err(Error::InvalidParameter(format!(
            "lifetime fit needs at least 8 points, got {n}"
        )));
    }
    if eta.len() != n || sigma.len() != n {
        return Err(Error::InvalidParameter("lifetime curve arrays differ in length".into()));
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) || t[0] < 0.0 {
        return Err(Error::InvalidParameter(
            "storage times must be non-negative and strictly ascending".into(),
        ));
    }
    if settings.phase_starts == 0 || settings.frequency_grid < 2 || settings.lifetime_grid < 2 {
        return Err(Error::InvalidParameter("lifetime fit grids must be non-empty".into()));
    }
    let span = t[n - 1] - t[0];
    let min_step = t.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    // Uniform sampling cannot tell omega from 2 pi / step - omega.
    let omega_nyquist = PI / min_step;
    let w: Vec<f64> = sigma.iter().map(|s| 1.0 / (s * s)).collect();

    // coarse profile: (loss, omega, tau)
    let taus: Vec<f64> = (0..settings.lifetime_grid)
        .map(|i| {
            let f = i as f64 / (settings.lifetime_grid - 1) as f64;
            (span / 50.0) * (2500f64).powf(f)
        })
        .collect();
    let scan: Vec<(f64, f64, f64)> = (0..settings.frequency_grid)
        .into_par_iter()
        .map(|i| {
            let omega = omega_nyquist * i as f64 / (settings.frequency_grid - 1) as f64;
            let mut best = (f64::INFINITY, omega, taus[0]);
            for &tau in &taus {
                for k in 0..16 {
                    let phi = PI * k as f64 / 16.0;
                    let shape: Vec<f64> = t.iter().map(|&x| lifetime_model(x, tau, omega, phi, 1.0)).collect();
                    let (_, loss) = best_scale(&shape, eta, &w);
                    if loss < best.0 {
                        best = (loss, omega, tau);
                    }
                }
            }
            best
        })
        .collect();
    let (_, omega0, tau0) = scan
        .iter()
        .copied()
        .fold((f64::INFINITY, 0.0, taus[0]), |a, b| if b.0 < a.0 { b } else { a });

    let eta_max = eta.iter().copied().fold(0.0, f64::max);
    let xs = t.to_vec();
    let make_problem = |phi0: f64, eta00: f64| {
        let xs = xs.clone();
        FitProblem::new(
            ModelId::Lifetime,
            lifetime_parameters(t, [tau0, omega0, phi0, eta00]),
            t.to_vec(),
            eta.to_vec(),
            sigma.to_vec(),
            move |p| Ok(xs.iter().map(|&x| lifetime_model(x, p[0], p[1], p[2], p[3])).collect()),
        )
    };

    let fits: Vec<Result<FitResult>> = (0..settings.phase_starts)
        .into_par_iter()
        .map(|k| {
            let phi0 = PI * k as f64 / 4.0;
            let shape_max = t
                .iter()
                .map(|&x| lifetime_model(x, tau0, omega0, phi0, 1.0))
                .fold(0.0, f64::max);
            let eta00 = (eta_max / shape_max.max(1e-12)).clamp(0.0, 1.0);
            let problem = make_problem(phi0, eta00)?;
            minimize(&problem, &problem.initial(), &settings.lm)
        })
        .collect();
    let mut best: Option<FitResult> = None;
    for fit in fits {
        let fit = fit?;
        if best.as_ref().is_none_or(|b| fit.loss < b.loss) {
            best = Some(fit);
        }
    }
    let mut fit = best.expect("at least one phase start");

    let omega = fit.estimates[1];
    if omega * span > 0.1 && omega * span < PI {
        return Err(Error::Unidentifiable(format!(
            "curve spans {:.3e} s, shorter than half a precession period ({:.3e} s) at the fitted frequency",
            span,
            PI / omega
        )));
    }
    fit.derived.insert("frequency_hz".into(), omega / (2.0 * PI));
    fit.derived
        .insert("frequency_hz_uncertainty".into(), fit.uncertainties[1] / (2.0 * PI));
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    const OMEGA: f64 = 2.0 * PI * 3.573e6;

    fn curve(phi: f64, omega: f64, noise: f64, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t: Vec<f64> = (0..30).map(|i| 400e-9 * i as f64 / 29.0).collect();
        let truth: Vec<f64> = t.iter().map(|&x| lifetime_model(x, 84e-9, omega, phi, 0.3)).collect();
        let sigma: Vec<f64> = truth.iter().map(|v| (noise * v).max(1e-12)).collect();
        let y = truth
            .iter()
            .zip(&sigma)
            .map(|(v, s)| {
                let e: f64 = StandardNormal.sample(&mut rng);
                v + if noise > 0.0 { s * e } else { 0.0 }
            })
            .collect();
        (t, y, sigma)
    }

    #[test]
    fn recovers_precession_from_noisy_curve() {
        let (t, y, s) = curve(PI / 2.0, OMEGA, 0.02, 3);
        let fit = fit_lifetime(&t, &y, &s, &LifetimeFitSettings::default()).unwrap();
        assert!((fit.estimate("t_mem").unwrap() - 84e-9).abs() < 3e-9, "{fit:?}");
        assert!((fit.derived["frequency_hz"] - 3.573e6).abs() < 0.02e6);
    }

    #[test]
    fn pure_exponential_without_field() {
        let (t, y, _) = curve(PI / 2.0, 0.0, 0.0, 0);
        let s: Vec<f64> = y.iter().map(|v| 0.01 * v).collect();
        let fit = fit_lifetime(&t, &y, &s, &LifetimeFitSettings::default()).unwrap();
        assert!(((fit.estimate("t_mem").unwrap() - 84e-9) / 84e-9).abs() < 0.02);
    }

    #[test]
    fn phase_shift_by_pi_gives_same_loss() {
        let (t, a, s) = curve(0.4, OMEGA, 0.0, 0);
        let (_, b, _) = curve(0.4 + PI, OMEGA, 0.0, 0);
        let s = s.iter().map(|v| v.max(1e-6)).collect::<Vec<_>>();
        let fa = fit_lifetime(&t, &a, &s, &LifetimeFitSettings::default()).unwrap();
        let fb = fit_lifetime(&t, &b, &s, &LifetimeFitSettings::default()).unwrap();
        assert!((fa.loss - fb.loss).abs() <= 1e-6 * (1.0 + fa.loss));
        assert!((fa.estimate("t_mem").unwrap() - 84e-9).abs() < 1e-10);
    }

    #[test]
    fn deterministic() {
        let (t, y, s) = curve(PI / 2.0, OMEGA, 0.02, 11);
        let a = fit_lifetime(&t, &y, &s, &LifetimeFitSettings::default()).unwrap();
        let b = fit_lifetime(&t, &y, &s, &LifetimeFitSettings::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn short_curve_is_rejected() {
        let t: Vec<f64> = (0..10).map(|i| 3e-9 * i as f64).collect();
        let y: Vec<f64> = t.iter().map(|&x| lifetime_model(x, 84e-9, OMEGA, 0.3, 0.3)).collect();
        let s = vec![1e-4; 10];
        assert!(fit_lifetime(&t[..7], &y[..7], &s[..7], &LifetimeFitSettings::default()).is_err());
        match fit_lifetime(&t, &y, &s, &LifetimeFitSettings::default()) {
            Err(Error::Unidentifiable(_)) => {}
            other => panic!("expected unidentifiable, got {other:?}"),
        }
    }
}
