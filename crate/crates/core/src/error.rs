use num_complex::Complex64;
use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("memory kernel has a pole at s = {0}")]
    KernelPole(Complex64),

    #[error("time-domain power-law kernel is undefined for gamma = 1")]
    UndefinedTimeKernel,

    #[error("formulation {0} has no closed-form advection-dispersion solution")]
    UnsupportedFormulation(u8),

    #[error("Laplace transform is not finite at s = {s}")]
    NonFiniteTransform { s: Complex64 },

    #[error("de Hoog inversion broke down at t = {t}")]
    InversionBreakdown { t: f64 },

    #[error("forward solve failed for sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("covariance matrix is singular")]
    SingularCovariance,

    #[error("not enough samples: need {needed}, have {have}")]
    NotEnoughSamples { needed: usize, have: usize },

    #[error("rejection sampling exceeded {0} retries")]
    RejectionLimit(usize),

    #[error("requested {requested} modes but the ensemble has numerical rank {rank}")]
    RankDeficient { requested: usize, rank: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("velocity {0} places every sample beyond the synthetic time window")]
    InfeasibleVelocity(f64),

    #[error("no feasible velocity on the grid")]
    NoFeasibleVelocity,

    #[error("loss is not finite at {0:?}")]
    NonFiniteLoss(Vec<f64>),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("family mismatch: expected {expected}, got {got}")]
    FamilyMismatch { expected: String, got: String },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("unknown export kind `{0}`")]
    UnknownExportKind(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
