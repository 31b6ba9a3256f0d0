use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::period::Period;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("corpus contains no valid documents")]
    EmptyCorpus,
    #[error("negative population {value} for period {period}")]
    NegativePopulation { period: Period, value: f64 },
    #[error("no population entry for period {0}")]
    MissingPopulation(Period),

    #[error("all terms were eliminated; vocabulary is empty")]
    EmptyVocabulary,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("expected a lowercase alphabetic word, got `{0}`")]
    NonAlphabeticInput(String),
    #[error("soundex requires a word starting with a letter")]
    EmptyInput,

    #[error("document frequency {df} outside 1..={n_docs}")]
    DfOutOfRange { df: usize, n_docs: usize },

    #[error("k = {k} exceeds the rank bound {max}")]
    KTooLarge { k: usize, max: usize },
    #[error("matrix has no nonzero entries")]
    ZeroMatrix,
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("weight {weight} for `{term}` in topic `{topic}` (row {row}) is outside (0, 1]")]
    WeightOutOfRange {
        topic: String,
        term: String,
        weight: f64,
        row: usize,
    },
    #[error("unknown topic `{0}`")]
    UnknownTopic(String),
    #[error("topic `{0}` has already been promoted")]
    AlreadyPromoted(String),
    #[error("topic `{0}` has no usable terms")]
    EmptyTopic(String),

    #[error("population is zero over the baseline span")]
    ZeroPopulation,
    #[error("baseline span has no periods, documents or exposure")]
    EmptyBaseline,
    #[error("expected count must be positive, got {0}")]
    NonpositiveExpected(f64),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by operator input (bad files, bad parameters),
    /// false for numerical or internal failures.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NoConvergence(_) | Error::DimensionMismatch(_) | Error::Json(_)
        )
    }
}
