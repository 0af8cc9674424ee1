use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or geometry value is outside its legal range.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operand cannot be represented in the requested encoding.
    #[error("encoding error: {0}")]
    Encoding(String),

    /// A weight matrix or input vector does not fit the macro geometry.
    #[error("mapping error: {0}")]
    Mapping(String),

    /// The ADC was handed a value it cannot convert.
    #[error("conversion error: {0}")]
    Conversion(String),

    /// The energy model produced a degenerate figure of merit.
    #[error("performance model error: {0}")]
    Perf(String),

    /// A file could not be parsed.
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
