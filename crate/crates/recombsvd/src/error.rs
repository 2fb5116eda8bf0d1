//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A FASTA record's sequence length disagrees with the first record.
    #[error("alignment error: record \"{label}\" has length {found}, expected {expected}")]
    Alignment {
        label: String,
        expected: usize,
        found: usize,
    },

    #[error("empty input: no sequence records found")]
    EmptyInput,

    #[error("malformed record: \"{label}\" has an empty sequence")]
    MalformedRecord { label: String },

    #[error("population requires at least two sequences, found {found}")]
    TooFewSequences { found: usize },

    #[error("index out of range: {0}")]
    Bounds(String),

    /// The smoothing window does not fit the sequence length.
    #[error("window error: half-width {window} invalid for sequence length {length}")]
    Window { window: usize, length: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("rank error: requested {requested} singular triplets, at most {max} available")]
    Rank { requested: usize, max: usize },

    #[error(
        "convergence error: residual {achieved:e} after {steps} Lanczos steps (budget {budget})"
    )]
    Convergence {
        achieved: f64,
        steps: usize,
        budget: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A permutation replicate failed; names the replicate so reruns can target it.
    #[error("replicate {index} failed: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI; each error family gets a distinct code.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_)
            | Error::Contract(_)
            | Error::Bounds(_)
            | Error::Window { .. }
            | Error::Rank { .. } => 2,
            Error::Io(_) => 3,
            Error::Alignment { .. }
            | Error::EmptyInput
            | Error::MalformedRecord { .. }
            | Error::TooFewSequences { .. } => 4,
            Error::Convergence { .. } | Error::Replicate { .. } => 5,
            Error::Json(_) => 6,
        }
    }
}
