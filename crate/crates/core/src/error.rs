use thiserror::Error;

use crate::dynamics::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A cost, gradient or Jacobian callback produced a non-finite value or
    /// reported a failure.
    #[error("evaluation failed for player {player:?} at {point:?}: {reason}")]
    Evaluation {
        player: Option<usize>,
        point: Vec<f64>,
        reason: String,
    },

    #[error("invalid argument `{arg}`: {reason}")]
    InvalidArgument { arg: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("ill-conditioned system: {0}")]
    Conditioning(String),

    #[error("no convergence after {iters} iterations (residual {residual:e})")]
    NotConverged {
        iters: usize,
        residual: f64,
        last: Vec<f64>,
        history: Vec<f64>,
    },

    #[error("unstable matrix: spectral radius {spectral_radius} >= 1")]
    Unstable { spectral_radius: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Simulation aborted; the trajectory up to the failure is kept.
    #[error("simulation aborted at iteration {}: {source}", partial.iters)]
    Simulation {
        #[source]
        source: Box<Error>,
        partial: Box<Trajectory>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn eval(player: Option<usize>, point: &[f64], reason: impl Into<String>) -> Self {
        Error::Evaluation {
            player,
            point: point.to_vec(),
            reason: reason.into(),
        }
    }

    /// Short stable identifier used in machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Evaluation { .. } => "evaluation",
            Error::InvalidArgument { .. } => "invalid_argument",
            Error::Dimension { .. } => "dimension",
            Error::Domain(_) => "domain",
            Error::Conditioning(_) => "conditioning",
            Error::NotConverged { .. } => "not_converged",
            Error::Unstable { .. } => "unstable",
            Error::Numerical(_) => "numerical",
            Error::Simulation { .. } => "simulation",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
