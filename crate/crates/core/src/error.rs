use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed map file: {message}")]
    MapParse { path: PathBuf, message: String },

    #[error("invalid map: {0}")]
    MapValidation(String),

    #[error("program line {line}: {message}")]
    ProgramSyntax { line: usize, message: String },

    #[error("program line {line}: unknown verb `{verb}`")]
    UnknownVerb { line: usize, verb: String },

    #[error("cannot bind program reference <{label}> ({id}): {reason}")]
    Unbindable { label: String, id: u32, reason: String },

    #[error("unknown narration template `{0}`")]
    UnknownTemplate(String),

    #[error("invalid scorer spec `{spec}`: {reason}")]
    BackendSpec { spec: String, reason: String },

    #[error("scoring backend unavailable: {0}")]
    BackendUnavailable(String),

    #[error("tokenization failed: {0}")]
    Tokenization(String),

    #[error("policy error: {0}")]
    Policy(String),

    #[error("missing relevancy score for item {0}")]
    MissingItemScore(u32),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("oracle instance too large: {size} room sequences exceeds the limit of {limit}")]
    OracleTooLarge { size: u128, limit: u128 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the scoring backend (as opposed to bad input).
    pub fn is_backend(&self) -> bool {
        matches!(self, Error::BackendUnavailable(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
