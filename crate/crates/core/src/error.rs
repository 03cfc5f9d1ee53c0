use thiserror::Error;

/// Failures raised while building distances, certificates, noises and couplings.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("assumption A violated: {0}")]
    AssumptionA(&'static str),
    #[error("assumption B violated: {0}")]
    AssumptionB(&'static str),
    #[error("r1 unbounded")]
    R1Unbounded,
    #[error("lambda out of range")]
    LambdaOutOfRange,
    #[error("b2 violated: budget {budget:.6e} exceeds log 2")]
    B2Violated { budget: f64 },
    #[error("quadrature non-convergent")]
    QuadratureNonConvergent,
    #[error("r1 too small vs l: r1 = {r1}, l = {l}")]
    R1TooSmall { r1: f64, l: f64 },
    #[error("k below floor: k = {k}, floor = {floor}")]
    KBelowFloor { k: f64, floor: f64 },
    #[error("negative distance")]
    NegativeDistance,
    #[error("not contractive: {0}")]
    NotContractive(String),
    #[error("r1 search failed")]
    R1SearchFailed,
    #[error("step size too large: {0}")]
    StepSizeTooLarge(&'static str),
    #[error("kappa out of range")]
    KappaOutOfRange,
    #[error("moment unavailable")]
    MomentUnavailable,
    #[error("alpha out of range")]
    AlphaOutOfRange,
    #[error("density unavailable")]
    DensityUnavailable,
    #[error("estimator variance too high")]
    VarianceTooHigh,
    #[error("instance too large")]
    InstanceTooLarge,
    #[error("insufficient samples")]
    InsufficientSamples,
    #[error("condition c4 violated")]
    ConditionC4Violated,
    #[error("invalid profile: {0}")]
    InvalidProfile(&'static str),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid noise: {0}")]
    InvalidNoise(String),
    #[error("certificate refused: unchecked condition {0}")]
    CertificateRefused(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
