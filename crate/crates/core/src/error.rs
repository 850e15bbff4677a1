use thiserror::Error;

/// Errors raised by graph construction, parameter validation and problem I/O.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("edge ({0}, {1}) is not forward: algorithmic graphs need i < j")]
    EdgeOrderViolation(usize, usize),

    #[error("edge ({0}, {1}) appears more than once")]
    DuplicateEdge(usize, usize),

    #[error("node {node} is outside 1..={n}")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("graph on {n} nodes is not connected")]
    NotConnected { n: usize },

    #[error("order {n} is too small (need at least {min})")]
    OrderTooSmall { n: usize, min: usize },

    #[error("edge ({0}, {1}) of the subgraph is missing from the parent graph")]
    NotASubgraph(usize, usize),

    #[error("node {node} has {count} in-edges in the forward-evaluation graph, expected exactly 1")]
    InDegreeViolation { node: usize, count: usize },

    #[error("preset `{kind}` does not support order {n}")]
    UnsupportedOrder { kind: String, n: usize },

    #[error("stepsize {value} outside the open interval (0, {upper})")]
    StepsizeOutOfRange { value: f64, upper: f64 },

    #[error("relaxation {value} at iteration {k} outside (0, {bound}]")]
    RelaxationOutOfRange { k: usize, value: f64, bound: f64 },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix has spectral norm below {0:e}; treat the operator as zero")]
    ZeroMatrix(f64),

    #[error("invalid operator parameters: {0}")]
    InvalidOperator(String),

    #[error("cocoercivity constant {requested} exceeds the tight constant {tight}")]
    BetaTooLarge { requested: f64, tight: f64 },

    #[error("product-space identity `{what}` violated by {deviation:e}")]
    IdentityViolation { what: &'static str, deviation: f64 },

    #[error("instance generation failed after {0} attempts")]
    GenerationFailure(usize),

    #[error("result table is empty")]
    EmptyTable,

    #[error("file not found: {0}")]
    FileNotFound(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
