use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),
    #[error("invalid free product orders: {0}")]
    InvalidOrders(String),
    #[error("presentation violates C'(1/6): {0}")]
    NotSmallCancellation(String),
    #[error("image of `{0}` is singular")]
    SingularImage(String),
    #[error("invalid representation: {0}")]
    InvalidRepresentation(String),
    #[error("matrix is not unimodular (det = {0})")]
    NotUnimodular(f64),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("edge into start vertex from `{0}`")]
    EdgeIntoStart(String),
    #[error("duplicate edge `{0}` -> `{1}`")]
    DuplicateEdge(String, String),
    #[error("automaton is already augmented")]
    AlreadyAugmented,
    #[error("transition matrix has no nontrivial component")]
    NoGrowth,
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("path support too large ({0} paths)")]
    SupportTooLarge(u128),
    #[error("path length mismatch ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("depth {0} exceeds the limit {1}")]
    DepthTooLarge(usize, usize),
    #[error("not enough data points")]
    InsufficientData,
    #[error("chain is not irreducible")]
    NotIrreducible,
    #[error("label mismatch: {0}")]
    LabelMismatch(String),
    #[error("sigma must be positive")]
    SigmaZero,
    #[error("prefix is not an admissible path from the start vertex")]
    InadmissiblePrefix,
    #[error("vertex `{0}` is not in a maximal component")]
    VertexNotMaximal(String),
    #[error("shadows are only exact for tree-like oracles")]
    NotTreeLike,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
