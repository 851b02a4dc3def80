use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid alphabet: {0}")]
    Alphabet(String),

    #[error("arithmetic overflow: {0}")]
    Overflow(String),

    #[error("control {0:?} has a component outside the control alphabet")]
    ControlOutsideAlphabet(Vec<i64>),

    #[error(
        "enumeration cap exceeded: {what} has {count} candidates, cap is {cap}; \
         use LP mode (--mode lp) for large alphabets"
    )]
    CapExceeded { what: String, count: u128, cap: u128 },

    #[error("invalid law: {0}")]
    Law(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("law is undefined at state {0:?}")]
    LawUndefined(Vec<f64>),

    #[error("lp: {0}")]
    Lp(String),

    #[error("heuristic failed at vertex {vertex} during {stage}: {detail}")]
    Heuristic {
        vertex: String,
        stage: String,
        detail: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
