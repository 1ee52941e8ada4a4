//! Error type shared by all engine modules.

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum EngineError {
    #[error("pointwise evaluation of the Dirac kernel is undefined")]
    DiracPointwiseEval,

    #[error("kernel evaluated at its singularity (x = 0)")]
    SingularityHit,

    #[error("quadrature did not converge within the refinement budget: {0}")]
    QuadratureFailure(String),

    #[error("tail integral diverges: {0}")]
    DivergentTail(String),

    #[error("transition density unavailable for this process")]
    DensityUnavailable,

    #[error("ellipticity violated at sampled point: min eigenvalue {found} < required {required}")]
    EllipticityViolation { found: f64, required: f64 },

    #[error("paths do not share a time grid")]
    GridMismatch,

    #[error("covariance matrix not positive semi-definite at maximum jitter {max_jitter}")]
    NotPsd { max_jitter: f64 },

    #[error("Dalang condition {condition} violated (verdict: {verdict})")]
    DalangViolated { condition: String, verdict: String },

    #[error("non-finite value in {context}: {detail}")]
    NonFinite { context: String, detail: String },

    #[error("unbounded kernel used without regularization")]
    UnboundedKernel,

    #[error("failed to build kernel interpolation table: {0}")]
    TableBuildFailure(String),

    #[error("no normalizable importance proposal for this kernel")]
    ProposalUnnormalizable,

    #[error("chaos order {order} above configured maximum {max}")]
    OrderTooHigh { order: usize, max: usize },

    #[error("no truncation level satisfies the tail-bound contraction in the search range")]
    TailBoundUnavailable,

    #[error("operation requires a translation-invariant process")]
    NotTranslationInvariant,

    #[error("lag grid spans fewer than 1.5 decades or has fewer than 4 points")]
    InsufficientDecades,

    #[error("increment estimate at lag {lag} is within 3 s.e. of zero")]
    NoiseDominated { lag: f64 },
}

pub type Result<T> = std::result::Result<T, EngineError>;
