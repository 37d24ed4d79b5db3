use thiserror::Error;

/// Errors produced by the toolkit.
///
/// Input/contract violations and numerical-diagnostic failures are kept in
/// separate variants so callers (notably the CLI) can map them onto distinct
/// exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degree {requested} exceeds the configured cap of {cap}")]
    DegreeCap { requested: usize, cap: usize },

    #[error("carrier mismatch: {0}")]
    CarrierMismatch(String),

    #[error(
        "equilibrium mass accumulates at the window edge (edge weight {edge_mass:.3e}); enlarge R beyond {radius}"
    )]
    EnlargeWindow { radius: f64, edge_mass: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("sampler diagnostics failed: {0}")]
    Diagnostics(String),

    #[error("truncation mass {mass:.3e} exceeds limit {limit:.1e}; R = {radius} is too small")]
    Truncation { mass: f64, limit: f64, radius: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures of a numerical procedure (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EnlargeWindow { .. }
                | Error::NonConvergence { .. }
                | Error::Diagnostics(_)
                | Error::Truncation { .. }
                | Error::Numerical(_)
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
