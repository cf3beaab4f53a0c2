use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("missing data file: {0}")]
    MissingFile(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("unknown categorical value {value:?} in column {column:?} (row {row})")]
    UnknownCategory {
        column: String,
        value: String,
        row: usize,
    },

    #[error("non-numeric token {token:?} in column {column:?} (row {row})")]
    NonNumeric {
        column: String,
        token: String,
        row: usize,
    },

    #[error("missing cell in column {column:?} (row {row})")]
    MissingCell { column: String, row: usize },

    #[error("constant feature column {0:?} cannot be standardized")]
    ConstantColumn(String),

    #[error("unknown feature {0:?}")]
    UnknownFeature(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("training diverged (non-finite loss at epoch {epoch}); try a smaller learning rate")]
    Divergence { epoch: usize },

    #[error("singular coalition system ({distinct} distinct coalitions for {features} features); increase nsamples")]
    SingularSystem { distinct: usize, features: usize },

    #[error("instance {row}: {source}")]
    Instance {
        row: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("missing artifact {artifact}: run {stage} first")]
    MissingArtifact { artifact: String, stage: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
