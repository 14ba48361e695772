use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FitProblem, FitResult, LmSettings, ParameterSpec};
use crate::{Error, Result};

const MAX_DAMPING: f64 = 1e20;
const MIN_DAMPING: f64 = 1e-15;
const CONDITION_LIMIT: f64 = 1e12;

/// Typical magnitude of a parameter, used for finite-difference steps and
/// relative step norms when the value itself is near zero.
fn scale_of(spec: &ParameterSpec, value: f64) -> f64 {
    let width = spec.upper - spec.lower;
    let floor = if width.is_finite() && width > 0.0 {
        1e-3 * width
    } else {
        1e-8
    };
    value.abs().max(floor)
}

/// Derivatives of `f(p)` (one column per parameter) by central differences,
/// falling back to one-sided differences at a bound.
fn derivative_columns<F>(
    f: F,
    params: &[ParameterSpec],
    p: &[f64],
    base: &[f64],
    rel_step: f64,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    (0..p.len())
        .into_par_iter()
        .map(|j| {
            let h = rel_step * scale_of(&params[j], p[j]);
            let spec = &params[j];
            let shifted = |delta: f64| {
                let mut q = p.to_vec();
                q[j] += delta;
                f(&q)
            };
            let up_ok = p[j] + h <= spec.upper;
            let down_ok = p[j] - h >= spec.lower;
            let col: Vec<f64> = match (up_ok, down_ok) {
                (true, true) => {
                    let a = shifted(h)?;
                    let b = shifted(-h)?;
                    a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * h)).collect()
                }
                (true, false) => {
                    let a = shifted(h)?;
                    a.iter().zip(base).map(|(x, y)| (x - y) / h).collect()
                }
                (false, true) => {
                    let b = shifted(-h)?;
                    base.iter().zip(&b).map(|(x, y)| (x - y) / h).collect()
                }
                (false, false) => vec![0.0; base.len()],
            };
            Ok(col)
        })
        .collect()
}

fn to_matrix(cols: Vec<Vec<f64>>, rows: usize) -> DMatrix<f64> {
    let n = cols.len();
    DMatrix::from_fn(rows, n, |i, j| cols[j][i])
}

/// Jacobian of the weighted residuals `(y - f(p)) / sigma` with respect to
/// the parameters, as used internally by [`minimize`].
pub fn jacobian(problem: &FitProblem<'_>, p: &[f64], settings: &LmSettings) -> Result<DMatrix<f64>> {
    let base = problem.residuals(p)?;
    let cols = derivative_columns(
        |q| problem.residuals(q),
        &problem.params,
        p,
        &base,
        settings.fd_relative_step,
    )?;
    Ok(to_matrix(cols, base.len()))
}

/// Covariance `(J^T J)^-1` in parameter units together with the condition
/// number of the column-scaled normal matrix.
fn covariance(j: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let a = j.transpose() * j;
    let n = a.nrows();
    let d: Vec<f64> = (0..n)
        .map(|i| {
            let v = a[(i, i)];
            if v > 0.0 {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let scaled = DMatrix::from_fn(n, n, |r, c| a[(r, c)] / (d[r] * d[c]));
    let svd = scaled.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let inv = svd
        .pseudo_inverse(smax * 1e-15)
        .unwrap_or_else(|_| DMatrix::zeros(n, n));
    let cov = DMatrix::from_fn(n, n, |r, c| inv[(r, c)] / (d[r] * d[c]));
    (cov, cond)
}

/// Levenberg-Marquardt minimization of the weighted squared residuals from
/// `start`, with box bounds enforced by clamping.
///
/// A step is accepted only if it lowers the loss, so the returned loss never
/// exceeds the loss at the (clamped) start.
pub fn minimize(problem: &FitProblem<'_>, start: &[f64], settings: &LmSettings) -> Result<FitResult> {
    settings.validate()?;
    if start.len() != problem.n_params() {
        return Err(Error::InvalidParameter(format!(
            "start vector has {} entries for {} parameters",
            start.len(),
            problem.n_params()
        )));
    }
    let n = problem.n_params();
    let mut p = problem.clamp(start);
    let start = p.clone();
    let mut r = problem.residuals(&p)?;
    let mut loss: f64 = r.iter().map(|v| v * v).sum();
    let initial_loss = loss;
    let mut lambda = settings.initial_damping;
    let mut trace = settings.record_trace.then(|| vec![loss]);
    let mut iterations = 0;
    let mut converged = false;
    let mut status = format!("maximum iterations ({}) reached", settings.max_iterations);

    if loss == 0.0 {
        converged = true;
        status = "zero residual at start".into();
    }

    while !converged && iterations < settings.max_iterations {
        iterations += 1;
        let j = jacobian(problem, &p, settings)?;
        let a = j.transpose() * &j;
        let g = j.transpose() * DVector::from_column_slice(&r);
        let mut accepted = false;
        while !accepted {
            let mut m = a.clone();
            for i in 0..n {
                let d = a[(i, i)];
                m[(i, i)] += lambda * if d > 0.0 { d } else { 1.0 };
            }
            let Some(chol) = m.cholesky() else {
                lambda *= 10.0;
                if lambda > MAX_DAMPING {
                    break;
                }
                continue;
            };
            let delta = chol.solve(&(-&g));
            let trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            let trial = problem.clamp(&trial);
            let rel_step = trial
                .iter()
                .zip(&p)
                .zip(&problem.params)
                .map(|((t, q), s)| (t - q).abs() / scale_of(s, *q))
                .fold(0.0, f64::max);
            if rel_step < settings.step_tolerance {
                converged = true;
                status = "step norm below tolerance".into();
                break;
            }
            let trial_r = match problem.residuals(&trial) {
                Ok(v) => Some(v),
                Err(Error::NonFinite(_)) | Err(Error::Degenerate { .. }) => None,
                Err(e) => return Err(e),
            };
            let trial_loss = trial_r
                .as_ref()
                .map(|v| v.iter().map(|x| x * x).sum::<f64>())
                .unwrap_or(f64::INFINITY);
            if trial_loss < loss {
                let decrease = (loss - trial_loss) / loss;
                p = trial;
                r = trial_r.expect("finite residuals");
                loss = trial_loss;
                lambda = (lambda / 10.0).max(MIN_DAMPING);
                accepted = true;
                if decrease < settings.loss_tolerance {
                    converged = true;
                    status = "relative loss change below tolerance".into();
                } else if loss == 0.0 {
                    converged = true;
                    status = "zero residual".into();
                }
            } else {
                lambda *= 10.0;
                if lambda > MAX_DAMPING {
                    break;
                }
            }
        }
        if let Some(t) = trace.as_mut() {
            t.push(loss);
        }
        if !accepted && !converged {
            // No damping level lowers the loss: a local minimum to working precision.
            converged = true;
            status = "no further decrease at maximum damping".into();
        }
    }

    let j = jacobian(problem, &p, settings)?;
    let (cov, condition_number) = covariance(&j);
    let dof = (problem.n_data() - n) as f64;
    let reduced = loss / dof;
    let cov = cov * reduced;
    let std_errors: Vec<f64> = (0..n).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    let mut warnings = Vec::new();
    if condition_number > CONDITION_LIMIT {
        warnings.push(format!(
            "ill-conditioned Jacobian (condition number {condition_number:.3e}); parameters may not be identifiable"
        ));
    }
    Ok(FitResult {
        model: problem.model,
        names: problem.params.iter().map(|s| s.name.clone()).collect(),
        uncertainties: std_errors.iter().map(|s| s * settings.coverage_factor).collect(),
        std_errors,
        coverage_factor: settings.coverage_factor,
        covariance: (0..n).map(|i| (0..n).map(|k| cov[(i, k)]).collect()).collect(),
        estimates: p,
        start,
        initial_loss,
        loss,
        residual_norm: loss.sqrt(),
        reduced_chi_square: reduced,
        n_data: problem.n_data(),
        converged,
        status,
        iterations,
        condition_number,
        trace,
        warnings,
        derived: Default::default(),
    })
}

/// Pointwise confidence band of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBand {
    pub center: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Multiplier applied to the propagated standard deviation.
    pub z: f64,
}

/// Linearized band `f(p) +- z sqrt(g C g^T)` for a model `f` evaluated at
/// the fit estimates, with `g` the parameter gradient of each output.
/// `z = 1.96` gives a 95% band.
pub fn confidence_band<F>(
    fit: &FitResult,
    params: &[ParameterSpec],
    f: F,
    z: f64,
    fd_relative_step: f64,
) -> Result<ConfidenceBand>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let center = f(&fit.estimates)?;
    let cols = derivative_columns(&f, params, &fit.estimates, &center, fd_relative_step)?;
    let n = fit.estimates.len();
    let mut lower = Vec::with_capacity(center.len());
    let mut upper = Vec::with_capacity(center.len());
    for (i, c) in center.iter().enumerate() {
        let mut var = 0.0;
        for a in 0..n {
            for b in 0..n {
                var += cols[a][i] * fit.covariance[a][b] * cols[b][i];
            }
        }
        let half = z * var.max(0.0).sqrt();
        lower.push(c - half);
        upper.push(c + half);
    }
    Ok(ConfidenceBand {
        center,
        lower,
        upper,
        z,
    })
}
