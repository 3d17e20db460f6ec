//! Crate-wide error type.
//!
//! Variants are grouped by how the CLI reports them: parse/domain problems are
//! configuration errors (exit 3), violated mathematical invariants exit 2, and
//! exceeded budgets exit 4.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A textual input (config document, environment spec, program text,
    /// symbol string) could not be parsed.
    #[error("parse error{}: {msg}", fmt_line(.line))]
    Parse { line: Option<usize>, msg: String },

    /// Parameters outside an operation's domain (e.g. a weight sum above 1,
    /// an epsilon outside (0,1), an undefined predictive ratio).
    #[error("domain error: {0}")]
    Domain(String),

    /// Conditioning on an event of probability zero.
    #[error("zero-probability prefix: {0}")]
    ZeroProbability(String),

    /// A checked mathematical invariant failed at run time.
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// A declared resource budget was exceeded or would be exceeded.
    #[error("resource limit: {0}")]
    Resource(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse {
            line: None,
            msg: msg.into(),
        }
    }

    pub fn parse_at(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line: Some(line),
            msg: msg.into(),
        }
    }

    /// Attach a line number to a parse error that lacks one; other variants
    /// pass through unchanged.
    pub fn at_line(self, line: usize) -> Self {
        match self {
            Error::Parse { line: None, msg } => Error::Parse {
                line: Some(line),
                msg,
            },
            other => other,
        }
    }

    /// Process exit code used by the CLI for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Domain(_) | Error::ZeroProbability(_) => 3,
            Error::Invariant(_) => 2,
            Error::Resource(_) => 4,
            Error::Io(_) | Error::Json(_) => 1,
        }
    }
}

fn fmt_line(line: &Option<usize>) -> String {
    match line {
        Some(n) => format!(" (line {n})"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
