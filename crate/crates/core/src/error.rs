use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configuration or scenario value violates its invariant. `path`
    /// names the offending field (`obstacles[2].shape.radius`).
    #[error("invalid {path}: {message}")]
    Invalid { path: String, message: String },

    #[error("steering angle {phi} is at the tan singularity")]
    SteeringSingular { phi: f64 },

    #[error("nearest-neighbor query on an empty point set")]
    EmptyPointSet,

    #[error("start {x:.3},{y:.3} is in collision")]
    StartInCollision { x: f64, y: f64 },

    #[error("no path found after {iterations} iterations")]
    PlanningFailed { iterations: usize },

    /// Every rollout hit the cost sentinel, so the weighted average is
    /// undefined.
    #[error("all {samples} rollouts are degenerate")]
    DegenerateSamples { samples: usize },

    /// `eps1 >= E1_hat`: the Chebyshev denominator is not positive.
    #[error("error bound eps1={eps1} is not below the weight mean estimate {e1_hat}")]
    WeightMeanBound { eps1: f64, e1_hat: f64 },

    #[error("probabilities sum to {sum}, expected 1")]
    Probabilities { sum: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable tag used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Invalid { .. } => "invalid",
            Error::SteeringSingular { .. } => "steering_singular",
            Error::EmptyPointSet => "empty_point_set",
            Error::StartInCollision { .. } => "start_in_collision",
            Error::PlanningFailed { .. } => "planning_failed",
            Error::DegenerateSamples { .. } => "degenerate_samples",
            Error::WeightMeanBound { .. } => "weight_mean_bound",
            Error::Probabilities { .. } => "probabilities",
            Error::Parse(_) => "parse",
            Error::Io { .. } => "io",
        }
    }
}
