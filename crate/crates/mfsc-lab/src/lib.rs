//! IO companion to the core laboratory: machine files, experiment configs,
//! CSV/JSONL reports and the command implementations behind the `mfsc`
//! binary. Everything here is plumbing; the mathematics lives in the core
//! crate.

pub mod commands;
pub mod config;
pub mod format;
pub mod report;

pub const EXIT_OK: i32 = 0;
/// At least one selected check did not hold.
pub const EXIT_VERIFY_FAILED: i32 = 1;
/// Bad flags, bad config, unreadable or invalid input files.
pub const EXIT_USAGE: i32 = 2;
/// An enumeration or materialization ran into its budget.
pub const EXIT_BUDGET: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: format::ParseError,
    },
    #[error("{path}: invalid machine: {summary}")]
    Machine { path: String, summary: String },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Budget(String),
}

impl LabError {
    pub fn usage(message: impl Into<String>) -> Self {
        LabError::Usage(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Budget(_) => EXIT_BUDGET,
            _ => EXIT_USAGE,
        }
    }
}
