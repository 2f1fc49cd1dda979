use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph is not a box (provenance: {0})")]
    NotABox(String),
    #[error("induced subgraph on {0} vertices is disconnected")]
    Disconnected(usize),
    #[error("edge {0} is out of range")]
    EdgeOutOfRange(usize),
    #[error("vertex {0} is out of range")]
    VertexOutOfRange(usize),
    #[error("reduced Laplacian is not positive definite (graph disconnected or a conductance is non-positive)")]
    NotPositiveDefinite,
    #[error("determinant multiplier {0} is not positive; factor corrupted")]
    BadMultiplier(f64),
    #[error("Dirichlet system is singular: an interior component has no boundary contact")]
    SingularDirichlet,
    #[error("enumeration guard exceeded: {what} = {value} > {limit}")]
    GuardExceeded {
        what: &'static str,
        value: f64,
        limit: f64,
    },
    #[error("invalid base measure: {0}")]
    InvalidMeasure(String),
    #[error("conductance {value} on edge {edge} is not an atom of its base measure")]
    NotAnAtom { edge: usize, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("state spaces do not match: {0}")]
    StateSpaceMismatch(String),
    #[error("insufficient batches: {got} < {need}")]
    InsufficientBatches { got: usize, need: usize },
    #[error("monotone coupling violated on edge {edge} at sweep {sweep}: free {free} > wired {wired}")]
    OrderingViolation {
        edge: usize,
        sweep: u64,
        free: f64,
        wired: f64,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("schema version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u32, found: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
