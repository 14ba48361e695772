//! Weighted nonlinear least squares with bounds, uncertainty estimates and a
//! brute-force grid oracle.

mod gaussian;
mod lifetime;
mod lm;
mod oracle;
mod spectrum_fit;

pub use gaussian::{fit_gaussian_peak, gaussian_bin_mean, runs_test_z};
pub(crate) use gaussian::normal_interval;
pub use lifetime::{fit_lifetime, lifetime_model, lifetime_parameters, LifetimeFitSettings};
pub use lm::{confidence_band, jacobian, minimize, ConfidenceBand};
pub use oracle::{grid_search_oracle, OracleResult, DEFAULT_ORACLE_BUDGET};
pub use spectrum_fit::{fit_spectrum, SpectrumFitSettings};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Model family of a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelId {
    Spectrum,
    Lifetime,
    GaussianPeak,
    Custom,
}

/// One free parameter with its start value and box bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    pub initial: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ParameterSpec {
    pub fn new(name: impl Into<String>, initial: f64, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            initial,
            lower,
            upper,
        }
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lower, self.upper)
    }
}

type Predictor<'a> = Box<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'a>;

/// Data, parameters and forward model of a weighted least-squares problem.
///
/// The loss is `sum ((y - f(p)) / sigma)^2`.
pub struct FitProblem<'a> {
    pub model: ModelId,
    pub params: Vec<ParameterSpec>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Vec<f64>,
    predict: Predictor<'a>,
}

impl<'a> std::fmt::Debug for FitProblem<'a> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FitProblem")
            .field("model", &self.model)
            .field("params", &self.params)
            .field("n_data", &self.x.len())
            .finish()
    }
}

impl<'a> FitProblem<'a> {
    /// `predict` maps a parameter vector to model values at every `x`.
    pub fn new<F>(
        model: ModelId,
        params: Vec<ParameterSpec>,
        x: Vec<f64>,
        y: Vec<f64>,
        sigma: Vec<f64>,
        predict: F,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'a,
    {
        if x.len() != y.len() || y.len() != sigma.len() {
            return Err(Error::InvalidParameter(format!(
                "data arrays differ in length (x {}, y {}, sigma {})",
                x.len(),
                y.len(),
                sigma.len()
            )));
        }
        if params.is_empty() {
            return Err(Error::InvalidParameter("fit has no free parameters".into()));
        }
        if y.len() <= params.len() {
            return Err(Error::InvalidParameter(format!(
                "{} data points cannot constrain {} parameters",
                y.len(),
                params.len()
            )));
        }
        for p in &params {
            if !(p.lower <= p.initial && p.initial <= p.upper) {
                return Err(Error::InvalidParameter(format!(
                    "start value {} of {} outside bounds [{}, {}]",
                    p.initial, p.name, p.lower, p.upper
                )));
            }
        }
        for (i, (&yi, &si)) in y.iter().zip(&sigma).enumerate() {
            if !yi.is_finite() || !x[i].is_finite() {
                return Err(Error::NonFinite(format!("data point {i}")));
            }
            if !(si > 0.0 && si.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "uncertainty of data point {i} must be positive, got {si}"
                )));
            }
        }
        Ok(Self {
            model,
            params,
            x,
            y,
            sigma,
            predict: Box::new(predict),
        })
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn n_data(&self) -> usize {
        self.y.len()
    }

    pub fn initial(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.initial).collect()
    }

    pub fn clamp(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.params).map(|(v, s)| s.clamp(*v)).collect()
    }

    pub fn predict(&self, p: &[f64]) -> Result<Vec<f64>> {
        let f = (self.predict)(p)?;
        if f.len() != self.y.len() {
            return Err(Error::InvalidParameter(format!(
                "model returned {} values for {} data points",
                f.len(),
                self.y.len()
            )));
        }
        Ok(f)
    }

    /// Weighted residuals `(y - f(p)) / sigma`.
    pub fn residuals(&self, p: &[f64]) -> Result<Vec<f64>> {
        let f = self.predict(p)?;
        let r: Vec<f64> = f
            .iter()
            .zip(&self.y)
            .zip(&self.sigma)
            .map(|((fi, yi), si)| (yi - fi) / si)
            .collect();
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("residuals at parameters {p:?}")));
        }
        Ok(r)
    }

    pub fn loss(&self, p: &[f64]) -> Result<f64> {
        Ok(self.residuals(p)?.iter().map(|r| r * r).sum())
    }
}

/// Optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmSettings {
    pub max_iterations: usize,
    /// Stop when the relative loss decrease of an accepted step is below this.
    pub loss_tolerance: f64,
    /// Stop when the relative step norm is below this.
    pub step_tolerance: f64,
    pub initial_damping: f64,
    /// Relative finite-difference step for the Jacobian.
    pub fd_relative_step: f64,
    /// Multiplier from standard errors to reported uncertainties.
    pub coverage_factor: f64,
    /// Keep the loss after every iteration in the result.
    pub record_trace: bool,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            loss_tolerance: 1e-10,
            step_tolerance: 1e-12,
            initial_damping: 1e-3,
            fd_relative_step: 1e-6,
            coverage_factor: 2.0,
            record_trace: false,
        }
    }
}

impl LmSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be >= 1".into()));
        }
        for (name, v) in [
            ("loss_tolerance", self.loss_tolerance),
            ("step_tolerance", self.step_tolerance),
            ("initial_damping", self.initial_damping),
            ("fd_relative_step", self.fd_relative_step),
            ("coverage_factor", self.coverage_factor),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Estimates with uncertainties and convergence diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelId,
    pub names: Vec<String>,
    pub estimates: Vec<f64>,
    /// One-sigma standard errors from the linearized covariance, scaled by
    /// the reduced chi-square.
    pub std_errors: Vec<f64>,
    /// `coverage_factor * std_errors`.
    pub uncertainties: Vec<f64>,
    pub coverage_factor: f64,
    pub covariance: Vec<Vec<f64>>,
    pub start: Vec<f64>,
    pub initial_loss: f64,
    pub loss: f64,
    pub residual_norm: f64,
    pub reduced_chi_square: f64,
    pub n_data: usize,
    pub converged: bool,
    pub status: String,
    pub iterations: usize,
    pub condition_number: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    /// Quantities derived from the estimates (e.g. OD_EIT for spectra).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub derived: BTreeMap<String, f64>,
}

impl FitResult {
    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn estimate(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.estimates[i])
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.std_errors[i])
    }

    pub fn uncertainty(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.uncertainties[i])
    }

    /// Fail with a non-convergence error unless the optimizer converged.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence(self.status))
        }
    }
}
