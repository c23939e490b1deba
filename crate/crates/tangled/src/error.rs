use std::fmt;

use serde::Serialize;

/// Exit status classes: 1 configuration, 2 input data, 3 internal failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Config,
    Data,
    Internal,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 1,
            ErrorKind::Data => 2,
            ErrorKind::Internal => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Config, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Data, message: message.into() }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Internal, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    /// Single-line JSON object for standard error.
    pub fn to_line(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            error: ErrorKind,
            code: i32,
            message: &'a str,
        }
        serde_json::to_string(&Line { error: self.kind, code: self.exit_code(), message: &self.message })
            .expect("plain struct serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} error: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<tangled_core::Error> for CliError {
    fn from(e: tangled_core::Error) -> Self {
        use tangled_core::Error as E;
        let kind = match &e {
            E::InvalidParameter { .. } | E::InfeasibleCorrelation { .. } => ErrorKind::Config,
            E::DimensionMismatch { .. }
            | E::EmptyInput(_)
            | E::DuplicateFeatureName(_)
            | E::NonFinite { .. }
            | E::UndefinedAngle(_)
            | E::DegenerateSplit { .. }
            | E::TooManyFeatures { .. }
            | E::InvalidModel(_) => ErrorKind::Data,
            E::Domain(_) | E::MissingCover { .. } => ErrorKind::Internal,
        };
        Self { kind, message: e.to_string() }
    }
}

pub type CliResult<T> = Result<T, CliError>;
