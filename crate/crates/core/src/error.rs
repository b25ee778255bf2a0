use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("cannot parse graph: {0}")]
    Parse(String),

    #[error("row {row} of the transition matrix sums to {sum}, expected 1")]
    NotStochastic { row: usize, sum: f64 },

    #[error("transition matrix entry ({row}, {col}) = {value} lies outside [0, 1]")]
    EntryOutOfRange { row: usize, col: usize, value: f64 },

    #[error("matrix has shape {rows}x{cols}, expected a square matrix")]
    NotSquare { rows: usize, cols: usize },

    #[error("transition matrix is not symmetric")]
    NotSymmetric,

    #[error("vertex {vertex} is out of range for n = {n}")]
    VertexOutOfRange { vertex: usize, n: usize },

    #[error("marked set is empty")]
    EmptyMarkedSet,

    #[error("every vertex is marked, the unmarked block is empty")]
    AllMarked,

    #[error("bound infinite: eigenvalue {lambda} of P_M carries overlap mass {nu_sq}")]
    BoundInfinite { lambda: f64, nu_sq: f64 },

    #[error("largest |eigenvalue| of P_M is {0}, must be below 1")]
    SpectralRadiusOne(f64),

    #[error("exact enumeration needs {required} terms but the cap is {cap}; use Monte Carlo mode")]
    EnumerationCap { required: f64, cap: u64 },

    #[error("candidate graph is not a subgraph of the base graph")]
    NotSubgraph,

    #[error("linear system is singular (marked set unreachable?)")]
    Singular,

    #[error("eigensolver did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
