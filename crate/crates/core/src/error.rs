use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("no records")]
    NoRecords,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("degenerate directions: {0}")]
    DegenerateDirections(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("zero vector cannot be normalized")]
    ZeroVector,

    #[error("point lies outside the metric domain")]
    OutsideDomain,

    #[error("uncovered point: nearest cell {nearest_cell} at distance {distance:.6}")]
    Uncovered { nearest_cell: usize, distance: f64 },

    #[error("normal coordinates beyond the chart extent (outside gamut)")]
    OutsideExtent,

    #[error("chart mismatch: {0}")]
    ChartMismatch(String),

    #[error("undefined correlation: zero variance")]
    UndefinedCorrelation,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("archive error: {0}")]
    Archive(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}
