use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("csv parse error: {0}")]
    Csv(String),

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("missing value at row {row}, column `{column}`")]
    MissingCell { row: usize, column: String },

    #[error("non-numeric value `{value}` at row {row}, column `{column}`")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("non-finite value at row {row}, column `{column}`")]
    NonFinite { row: usize, column: String },

    #[error("need at least {required} observations, got {got}")]
    TooFewObservations { required: usize, got: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate margin: all values equal")]
    DegenerateMargin,

    #[error("degenerate data: column {0} of the normal scores is constant")]
    ConstantColumn(usize),

    #[error("degenerate weights: total weight {0:e} is not positive")]
    DegenerateWeights(f64),

    #[error("target {target} lies outside the range of b'")]
    OutOfRange { target: f64 },

    #[error("ill-conditioned system (condition number {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("at t = {t}: {source}")]
    AtIndex { t: f64, source: Box<Error> },

    #[error("all {0} bootstrap replicates failed")]
    AllReplicatesFailed(usize),
}

impl Error {
    /// Stable machine-readable code for structured error output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io.error",
            Error::Csv(_) => "data.csv",
            Error::MissingColumn(_) => "data.missing_column",
            Error::MissingCell { .. } => "data.missing_cell",
            Error::NonNumeric { .. } => "data.non_numeric",
            Error::NonFinite { .. } => "data.non_finite",
            Error::TooFewObservations { .. } => "data.too_few_observations",
            Error::DimensionMismatch(_) => "input.dimension_mismatch",
            Error::InvalidArgument(_) => "input.invalid_argument",
            Error::DegenerateMargin => "numeric.degenerate_margin",
            Error::ConstantColumn(_) => "numeric.constant_column",
            Error::DegenerateWeights(_) => "numeric.degenerate_weights",
            Error::OutOfRange { .. } => "numeric.out_of_range",
            Error::IllConditioned { .. } => "numeric.ill_conditioned",
            Error::NoConvergence { .. } => "numeric.no_convergence",
            Error::AtIndex { source, .. } => source.code(),
            Error::AllReplicatesFailed(_) => "numeric.all_replicates_failed",
        }
    }

    /// True for failures of the numerical procedures, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        self.code().starts_with("numeric.")
    }
}

pub type Result<T> = std::result::Result<T, Error>;
