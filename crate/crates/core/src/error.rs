use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{what} = {value} is outside the valid range {range}")]
    Domain {
        what: &'static str,
        value: f64,
        range: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("susceptibility denominator degenerate at detuning {delta_hz} Hz")]
    Degenerate { delta_hz: f64 },

    #[error("numerical accuracy: {0}")]
    Accuracy(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("model validity: {0}")]
    ModelValidity(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("histogram resolution: {0}")]
    Resolution(String),

    #[error("pulse overlap: {0}")]
    Overlap(String),

    #[error("parameter not identifiable: {0}")]
    Unidentifiable(String),

    #[error("bandwidth undetermined: {0}")]
    BandwidthUndetermined(String),

    #[error("grid search needs {required} evaluations, budget is {limit}")]
    BudgetExceeded { required: u128, limit: u128 },

    #[error("fit did not converge: {0}")]
    NonConvergence(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{}: row {row}, column {column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, range: impl Into<String>) -> Self {
        Error::Domain {
            what,
            value,
            range: range.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::InvalidParameter(_) => 2,
            Error::NonConvergence(_) => 4,
            Error::Io(_) | Error::Json(_) => 1,
            _ => 3,
        }
    }

    /// Short machine-readable tag for structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Degenerate { .. } => "degenerate",
            Error::Accuracy(_) => "accuracy",
            Error::NonFinite(_) => "non_finite",
            Error::ModelValidity(_) => "model_validity",
            Error::NotFound(_) => "not_found",
            Error::Resolution(_) => "resolution",
            Error::Overlap(_) => "overlap",
            Error::Unidentifiable(_) => "unidentifiable",
            Error::BandwidthUndetermined(_) => "bandwidth_undetermined",
            Error::BudgetExceeded { .. } => "budget_exceeded",
            Error::NonConvergence(_) => "non_convergence",
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
