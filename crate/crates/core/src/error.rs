use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("design matrix is rank deficient: column {column} ({name}) is collinear with earlier columns")]
    RankDeficient { column: usize, name: String },

    #[error("no convergence after {iterations} iterations ({reason})")]
    NonConvergence {
        iterations: usize,
        reason: String,
        /// Last iterate of the parameter vector.
        last: Vec<f64>,
    },

    #[error("singular matrix in {context} (condition estimate {condition:.3e})")]
    Singular { context: String, condition: f64 },

    #[error("duplicate entry for centre {centre} in year {year}")]
    Duplicate { centre: String, year: i32 },

    #[error("years {year_a} and {year_b} are jointly observed for only {count} centre(s); at least 2 are needed")]
    NotIdentifiable { year_a: i32, year_b: i32, count: usize },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of the numerics (non-convergence, singularity)
    /// rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::Singular { .. }
        )
    }
}
