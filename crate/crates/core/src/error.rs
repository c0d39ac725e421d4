use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("categorical column `{0}` has fewer than two observed levels")]
    SingleLevel(String),
    #[error("binary column `{name}` must take exactly two distinct values, found {found}")]
    BinaryLevels { name: String, found: usize },
    #[error("column `{column}`: unseen level `{level}`")]
    UnseenLevel { column: String, level: String },
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error("invalid model state: {0}")]
    InvalidState(String),
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("rank-deficient design; dependent columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("no posterior draws")]
    EmptyDraws,
    #[error("exact enumeration supports at most {max} players, got {got}")]
    TooManyPlayers { got: usize, max: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("coefficient precision matrix is not positive definite")]
    Cholesky,
    #[error("slice sampler target is not finite for {param}; state: {state}")]
    SliceTarget { param: String, state: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors that indicate a defect in the sampler rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Cholesky | Error::SliceTarget { .. })
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ZeroVariance(_) | Error::SingleLevel(_) | Error::BinaryLevels { .. } | Error::UnseenLevel { .. } => {
                "data"
            }
            Error::Schema(_) => "schema",
            Error::Shape(_) => "shape",
            Error::InvalidState(_) => "state",
            Error::NonFinite(_) => "non_finite",
            Error::RankDeficient(_) => "rank_deficient",
            Error::EmptyDraws => "empty_draws",
            Error::TooManyPlayers { .. } | Error::InvalidArgument(_) => "argument",
            Error::Parse(_) | Error::Csv(_) => "parse",
            Error::Cholesky | Error::SliceTarget { .. } => "internal",
            Error::Io { .. } => "io",
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
