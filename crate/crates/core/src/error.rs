use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {coords:?} lies outside the {chart} chart domain")]
    OutOfDomain { chart: &'static str, coords: Vec<f64> },

    #[error("trajectory left the {chart} chart at {coords:?}")]
    DomainExit { chart: &'static str, coords: Vec<f64> },

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("integrator step {step} outside the accepted range (0, {max}]")]
    StepTooLarge { step: f64, max: f64 },

    #[error("arclength {arclength} exceeds the configured maximum {max}")]
    ArclengthExceeded { arclength: f64, max: f64 },

    #[error("frame matrix is singular")]
    SingularFrame,

    #[error("frame orthonormality drifted by {drift:e} in one integrator step (limit {limit:e})")]
    OrthonormalityDrift { drift: f64, limit: f64 },

    #[error("{got} samples requested, at least {min} are required")]
    InsufficientSamples { got: usize, min: usize },

    #[error("{replicas} usable replicas, at least {min} are required")]
    TooFewReplicas { replicas: usize, min: usize },

    #[error("test function `{function}` has no {method} reference")]
    UnsupportedFunction { function: String, method: String },

    #[error("slope fit is degenerate: {0}")]
    FitDegenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },
}

impl Error {
    /// Trajectory-level failures that abort one replica but not a batch.
    pub fn is_replica_failure(&self) -> bool {
        matches!(self, Error::DomainExit { .. } | Error::OutOfDomain { .. } | Error::OrthonormalityDrift { .. })
    }
}
