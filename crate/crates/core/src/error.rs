use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid configuration: {0}")]
    Configuration(String),

    #[error("cannot parse configuration {text:?}: {reason}")]
    ConfigurationParse { text: String, reason: String },

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("geometry mismatch between operands")]
    GeometryMismatch,

    #[error("reachable closure exceeds max_dim = {max_dim} (reached {reached} configurations)")]
    Capacity { max_dim: usize, reached: usize },

    #[error("rule {index} ({phase}): {reason}")]
    Compile {
        index: usize,
        phase: &'static str,
        reason: String,
    },

    #[error("basis is not closed: transition {from} -> {to} leaves the enumeration")]
    NotClosed { from: String, to: String },

    #[error("configuration {0} is not in the basis")]
    NotInBasis(String),

    #[error("operator is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error(
        "homogeneity check needs a cyclic lattice; use a windowed comparison on bounded lattices"
    )]
    BoundedHomogeneity,

    #[error("coupling constant must be positive and finite, got {0}")]
    Coupling(f64),

    #[error("invalid evolution parameters: {0}")]
    Method(String),

    #[error(
        "krylov evolution did not converge within {substeps} substeps (error estimate {estimate:.3e}); \
         use dense_eigen or a smaller time"
    )]
    KrylovConvergence { substeps: usize, estimate: f64 },

    #[error("times must be non-negative and ascending")]
    Times,

    #[error("invalid task: {0}")]
    Task(String),

    #[error("lookup table is not total: missing entry for (l2={l2}, l1={l1}, s={s})")]
    LookupNotTotal { l2: usize, l1: usize, s: u8 },

    #[error("nondeterministic step from {context}: {branches} branches")]
    Nondeterministic { context: String, branches: usize },

    #[error("scenario: {0}")]
    Scenario(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
