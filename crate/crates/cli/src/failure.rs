//! Run failures and their exit codes.

use std::fmt;

use stabcert::Error;

#[derive(Debug)]
pub enum Failure {
    /// A checked identity or accounting invariant did not hold.
    Invariant(String),
    /// Files, pipes or the external model misbehaved.
    Io(String),
    /// Flags or input values are out of range.
    Config(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Invariant(_) => 1,
            Failure::Io(_) => 2,
            Failure::Config(_) => 3,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Failure::Config(msg.into())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invariant(m) => write!(f, "invariant violated: {m}"),
            Failure::Io(m) => write!(f, "io error: {m}"),
            Failure::Config(m) => write!(f, "configuration error: {m}"),
        }
    }
}

fn is_config(e: &Error) -> bool {
    match e {
        Error::Argument(_) | Error::Dimension { .. } | Error::Resource { .. } => true,
        Error::Sample { source, .. } => is_config(source),
        _ => false,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if is_config(&e) {
            Failure::Config(e.to_string())
        } else {
            Failure::Io(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

pub type Outcome<T> = std::result::Result<T, Failure>;
