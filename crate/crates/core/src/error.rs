use thiserror::Error;

/// Errors raised by the library. Stage-level failures in the pipeline are
/// wrapped in [`Error::Stage`] so the failing step is always named.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid interval: {0}")]
    InvalidInterval(String),

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("unsupported for this system: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown box id {0}")]
    UnknownBox(usize),

    #[error("transition matrix has no column for box {0}")]
    IncompleteMap(usize),

    #[error("neighborhood growth left the tree: {0}")]
    Coverage(String),

    #[error("not an isolating neighborhood: {0}")]
    NotIsolating(String),

    #[error("no connection found for pair {label} at depth {depth}")]
    NoConnection { label: String, depth: u32 },

    #[error("invalid edge weight parameter: {0}")]
    InvalidWeight(String),

    #[error("seeding failed: {0}")]
    Seeding(String),

    #[error("invalid cubical pair: {0}")]
    InvalidComplex(String),

    #[error("enclosure is not acyclic on boxes {0:?}")]
    NotAcyclic(Vec<usize>),

    #[error("homology computation failed: {0}")]
    Homology(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn at(self, stage: &'static str) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
