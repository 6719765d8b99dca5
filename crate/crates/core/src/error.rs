use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("conflicting types at `{path}`: {detail}")]
    ConflictingTypes { path: String, detail: String },

    #[error("schema violation at `{path}`: expected {expected}, found {found}")]
    SchemaViolation {
        path: String,
        expected: String,
        found: String,
    },

    #[error("malformed JSON: {0}")]
    MalformedJson(#[from] serde_json::Error),

    #[error("missing value at `{0}` in a full-evidence query")]
    MissingInDensityMode(String),

    #[error("non-finite gradient{}", batch.map(|b| format!(" in batch {b}")).unwrap_or_default())]
    NonFiniteGradient { batch: Option<usize> },

    #[error("enumeration of {terms} terms exceeds the limit of {limit}")]
    TooLarge { terms: f64, limit: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn violation(
        path: impl Into<String>,
        expected: impl Into<String>,
        found: impl Into<String>,
    ) -> Self {
        Error::SchemaViolation {
            path: path.into(),
            expected: expected.into(),
            found: found.into(),
        }
    }
}
