use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FitProblem;
use crate::{Error, Result};

/// Largest grid the oracle evaluates by default.
pub const DEFAULT_ORACLE_BUDGET: u128 = 10_000_000;

const MAX_ORACLE_PARAMS: usize = 4;

/// Best grid point of an exhaustive search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub point: Vec<f64>,
    pub loss: f64,
    pub evaluations: u128,
    /// Grid step per axis.
    pub steps: Vec<f64>,
}

fn axis_value(lower: f64, upper: f64, n: usize, i: usize) -> f64 {
    if n == 1 {
        0.5 * (lower + upper)
    } else {
        lower + (upper - lower) * i as f64 / (n - 1) as f64
    }
}

/// Exhaustive evaluation of the loss on a uniform grid spanning the parameter
/// bounds (`resolution[k]` nodes on axis `k`, ends included).
///
/// Ties are broken lexicographically: the point with the smallest first
/// coordinate wins, then the second, and so on. Points where the model
/// fails count as infinite loss.
pub fn grid_search_oracle(
    problem: &FitProblem<'_>,
    resolution: &[usize],
    budget: u128,
) -> Result<OracleResult> {
    let n = problem.n_params();
    if n > MAX_ORACLE_PARAMS {
        return Err(Error::InvalidParameter(format!(
            "grid oracle handles at most {MAX_ORACLE_PARAMS} parameters, got {n}"
        )));
    }
    if resolution.len() != n || resolution.contains(&0) {
        return Err(Error::InvalidParameter(
            "grid oracle needs a positive resolution for every parameter".into(),
        ));
    }
    for p in &problem.params {
        if !(p.lower.is_finite() && p.upper.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid oracle needs finite bounds for {}",
                p.name
            )));
        }
    }
    let required: u128 = resolution.iter().map(|&r| r as u128).product();
    if required > budget {
        return Err(Error::BudgetExceeded {
            required,
            limit: budget,
        });
    }
    let total = required as u64;
    let point_at = |mut idx: u64| -> Vec<f64> {
        let mut v = vec![0.0; n];
        for k in (0..n).rev() {
            let r = resolution[k] as u64;
            let i = (idx % r) as usize;
            idx /= r;
            let s = &problem.params[k];
            v[k] = axis_value(s.lower, s.upper, resolution[k], i);
        }
        v
    };
    // Flat index runs with the first parameter slowest, so the lowest index
    // among equal losses is the lexicographically first point.
    let (loss, idx) = (0..total)
        .into_par_iter()
        .map(|i| {
            let l = problem.loss(&point_at(i)).unwrap_or(f64::INFINITY);
            (if l.is_nan() { f64::INFINITY } else { l }, i)
        })
        .reduce(
            || (f64::INFINITY, u64::MAX),
            |a, b| {
                if a.0 < b.0 || (a.0 == b.0 && a.1 < b.1) {
                    a
                } else {
                    b
                }
            },
        );
    let steps = problem
        .params
        .iter()
        .zip(resolution)
        .map(|(s, &r)| if r > 1 { (s.upper - s.lower) / (r - 1) as f64 } else { 0.0 })
        .collect();
    Ok(OracleResult {
        point: point_at(idx),
        loss,
        evaluations: required,
        steps,
    })
}
