use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("syntax error at byte {offset}: {msg}")]
    Syntax { offset: usize, msg: String },
    #[error("genericity violation: degree of {tree} vanishes at eps={eps}, 1/p={inv_p}")]
    Genericity { tree: String, eps: String, inv_p: String },
    #[error("tree {0} has more than one H edge")]
    TooManyH(String),
    #[error("tree {0} is not in T^(1)")]
    NotT1(String),
    #[error("tree {0} already contains an H edge")]
    HasH(String),
    #[error("missing character value on generator {0}")]
    MissingGenerator(String),
    #[error("invalid rule: {0}")]
    Rule(String),
    #[error("sector error: {0}")]
    Sector(String),
    #[error("counterterm support violation on {0}")]
    Support(String),
    #[error("left the sector span: {0}")]
    OutsideSector(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("quadrature disagreement {0:e} above tolerance")]
    Quadrature(f64),
    #[error("ellipticity violated on the frequency lattice: {0}")]
    Ellipticity(String),
    #[error("non-convergent estimate: {0}")]
    NonConvergent(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
