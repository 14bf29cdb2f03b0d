use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Grid location `(t, i)` of a failure inside a discretized curve family.
/// `curve` is `None` for single-geodesic solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub t: usize,
    pub curve: Option<usize>,
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.curve {
            Some(i) => write!(f, "t={}, i={}", self.t, i),
            None => write!(f, "t={}", self.t),
        }
    }
}

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("matrix is not positive definite: pivot {pivot} = {value:e}{}", fmt_loc(.location))]
    NotSpd {
        pivot: usize,
        value: f64,
        location: Option<Location>,
    },

    #[error("non-finite value at coordinate {index}: {context}")]
    Numerical { index: usize, context: String },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("point outside the chart domain ({what})")]
    Domain { what: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("ill-posed Randers metric: wind norm {wind_norm} >= v0 = {v0}")]
    IllPosedRanders { wind_norm: f64, v0: f64 },

    #[error("line search stalled after {halvings} halvings")]
    StalledLineSearch { halvings: usize },

    #[error("ODE integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("optimizer diverged at iteration {iteration} (objective {objective:e})")]
    Diverged {
        iteration: usize,
        objective: f64,
        /// Mean iterate at the moment divergence was detected.
        snapshot: Vec<f64>,
    },

    #[error("io error: {0}")]
    Io(String),
}

fn fmt_loc(loc: &Option<Location>) -> String {
    loc.map(|l| format!(" at {l}")).unwrap_or_default()
}

impl Error {
    /// Attach a grid location to errors that carry one.
    pub fn at(self, t: usize, curve: Option<usize>) -> Self {
        match self {
            Error::NotSpd { pivot, value, .. } => Error::NotSpd {
                pivot,
                value,
                location: Some(Location { t, curve }),
            },
            Error::Domain { what } => Error::Domain {
                what: format!("{what} at {}", Location { t, curve }),
            },
            other => other,
        }
    }

    pub fn domain(what: impl Into<String>) -> Self {
        Error::Domain { what: what.into() }
    }

    /// Stable machine-readable tag, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotSpd { .. } => "not_spd",
            Error::Numerical { .. } => "numerical",
            Error::Shape { .. } => "shape",
            Error::Domain { .. } => "domain",
            Error::Config(_) => "config",
            Error::IllPosedRanders { .. } => "ill_posed_randers",
            Error::StalledLineSearch { .. } => "stalled_line_search",
            Error::Integration { .. } => "integration",
            Error::Diverged { .. } => "diverged",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
