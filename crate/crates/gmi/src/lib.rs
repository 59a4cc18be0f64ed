//! Command-line driver over `gmi-core`: strict JSON configuration in, CSV out.
//!
//! Exit codes: 0 success, 1 runtime failure (including failed validation
//! checks), 2 configuration error.

pub mod commands;
pub mod config;
mod table;
pub mod validate;

pub use table::{fmt_count, fmt_num, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error(transparent)]
    Model(#[from] gmi_core::Error),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CliError::Config(vec![msg.into()])
    }
}
