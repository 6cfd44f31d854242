use std::path::PathBuf;

use thiserror::Error;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or inconsistent input data.
    Data,
    /// The numerical problem has no usable solution (degenerate eigen system, singular weights).
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}, line {line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("missing value: {0}")]
    Missing(String),

    #[error("no overlapping regions")]
    NoOverlap,

    #[error("prune required: {0}")]
    PruneRequired(String),

    #[error("degenerate system: {0}")]
    Degenerate(String),

    #[error("disconnected specialization network: {0}")]
    Disconnected(String),

    #[error("constant field: {0}")]
    ConstantField(String),

    #[error("no edges: {0}")]
    NoEdges(String),

    #[error("rank-deficient regressors: collinear columns [{}]", .0.join(", "))]
    RankDeficient(Vec<String>),

    #[error("instrument proliferation: {instruments} instruments for {regions} regions; enable instrument collapsing or reduce the lag depth")]
    InstrumentProliferation { instruments: usize, regions: usize },

    #[error("singular weighting matrix: {0}")]
    SingularWeighting(String),

    #[error("not overidentified: {instruments} instruments for {parameters} parameters")]
    NotOveridentified { instruments: usize, parameters: usize },

    #[error("insufficient periods: {0}")]
    InsufficientPeriods(String),

    #[error("empty panel: {0}")]
    EmptyPanel(String),

    #[error("power iteration did not converge after {0} iterations")]
    NoConvergence(usize),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Degenerate(_)
            | Error::Disconnected(_)
            | Error::ConstantField(_)
            | Error::RankDeficient(_)
            | Error::SingularWeighting(_)
            | Error::NoConvergence(_) => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
