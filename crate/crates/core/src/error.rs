use chrono::NaiveDate;
use thiserror::Error;

use crate::ingest::CurrencyCode;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("invalid currency code {0:?}: expected three letters A-Z")]
    InvalidCode(String),
    #[error("duplicate currency column {0}")]
    DuplicateCurrency(CurrencyCode),
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("line {line}: unparseable date {value:?}")]
    BadDate { line: u64, value: String },
    #[error("line {line}: unparseable price {value:?} for {code}")]
    BadPrice {
        line: u64,
        code: CurrencyCode,
        value: String,
    },
    #[error("line {line}: non-positive price {value} for {code}")]
    NonPositivePrice {
        line: u64,
        code: CurrencyCode,
        value: f64,
    },
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("too few dates: need at least {needed}, have {found}")]
    TooFewDates { needed: usize, found: usize },
    #[error("panel is not rectangular: {0} has missing values")]
    NotRectangular(CurrencyCode),
    #[error("unknown currency {0}")]
    UnknownCurrency(CurrencyCode),
    #[error("quote currency {0} also appears as a panel column")]
    QuoteIsColumn(CurrencyCode),
    #[error("zero variance series for {0}")]
    ZeroVariance(CurrencyCode),
    #[error("return panel for base {0} is not normalized")]
    NotNormalized(CurrencyCode),
    #[error("matrix is not symmetric: max |a_ij - a_ji| = {0:e}")]
    Asymmetric(f64),
    #[error("eigensolver did not converge after {sweeps} sweeps (residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },
    #[error("matrix entry ({row}, {col}) = {value} outside the admissible range")]
    EntryOutOfRange { row: usize, col: usize, value: f64 },
    #[error("too few points for fit: need {needed}, have {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("point {index}: lambda_max {lambda_max} not above the random-matrix bound {lambda_rm}")]
    BelowRandomBound {
        index: usize,
        lambda_max: f64,
        lambda_rm: f64,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown export format {0:?}")]
    UnknownFormat(String),
    #[error("group config: {0}")]
    GroupConfig(String),
    #[error("malformed tree: {0}")]
    MalformedTree(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
