use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("kernel evaluated at the singularity z = 0")]
    KernelSingularity,

    #[error("point x = {x} lies outside the domain")]
    OutsideDomain { x: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("assembly failed on element pair ({first}, {second}): {reason}")]
    Assembly {
        first: usize,
        second: usize,
        reason: String,
    },

    #[error("vectors must be nodally nonnegative with disjoint supports (violated at node {node})")]
    OverlappingSupports { node: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("eigensolver failed: {0}")]
    EigenSolve(String),

    #[error("first eigenvalue is numerically multiple (relative gap {gap:e}); the discretization is inconsistent with a simple principal eigenvalue")]
    MultiplePrincipal { gap: f64 },

    #[error("weight vector must be strictly positive (entry {index})")]
    NonpositiveWeight { index: usize },

    #[error("domain containment violated: {0}")]
    Containment(String),

    #[error("seed vector must change sign")]
    SeedDoesNotChangeSign,

    #[error("Newton corrector did not converge within {max_iter} iterations (residual {residual:e})")]
    NewtonNonConvergence { max_iter: usize, residual: f64 },

    #[error("singular generalized Jacobian during Newton step")]
    SingularJacobian,

    #[error("nonlinearity rejected: {0}")]
    NonlinearitySpec(String),

    #[error("endpoint search exceeded R = 2^20; the primitive bounds are too close to resonance")]
    EndpointSearchFailed,

    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
