use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("query `{query}` evaluated to {value} at record {index}, outside [0, 1]")]
    QueryRange {
        query: String,
        index: usize,
        value: f64,
    },

    #[error("dataset has {n} records, at least {min} required")]
    TooFewRecords { n: usize, min: usize },

    #[error("index {index} out of range for {len} elements")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameter {name} = {value}: {reason}")]
    Parameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("parameter regime violated: {0}")]
    Regime(String),

    #[error("query budget of {budget} answers exhausted")]
    BudgetExhausted { budget: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("distribution error: {0}")]
    Distribution(String),

    #[error("truth model cannot evaluate query: {0}")]
    Truth(String),

    #[error("enumeration needs {cells} cells, guard is {limit}")]
    SizeGuard { cells: u128, limit: u128 },

    #[error("i/o error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Error {
    Error::Parameter {
        name,
        value,
        reason,
    }
}
