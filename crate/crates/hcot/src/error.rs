//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("identical points admit no nontrivial geodesic")]
    IdenticalPoints,

    #[error("singular configuration: {0}")]
    SingularConfiguration(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("infeasible transport problem: {0}")]
    Infeasible(String),

    #[error("geodesic exits the grid box at {0:?}")]
    OutOfBox(Vec<f64>),

    #[error("empty lattice: box too small to contain a node")]
    EmptyLattice,

    #[error("nodes {0} and {1} are not adjacent on the lattice")]
    NotAdjacent(usize, usize),

    #[error("demand pair ({0}, {1}) is disconnected")]
    Disconnected(usize, usize),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
