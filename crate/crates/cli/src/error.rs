use std::path::PathBuf;

use serde::Serialize;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] bicausal::Error),

    #[error("column '{0}' is not in the header")]
    MissingColumn(String),

    #[error("column '{column}' has literal '{literal}' with no recoding")]
    UnmappedLiteral { column: String, literal: String },

    #[error("no rows left after dropping {dropped} with missing role values")]
    EmptyAfterFiltering { dropped: usize },

    #[error("column '{column}', data row {row}: {message}")]
    InvalidValue { column: String, row: usize, message: String },

    #[error("invalid column schema: {0}")]
    Schema(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },

    #[error("{0}")]
    Usage(String),
}

/// Exit status classes. Each error maps to exactly one.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const INPUT_DATA: i32 = 4;
    pub const INVALID_PARAMETER: i32 = 5;
    pub const ESTIMATION: i32 = 6;
    pub const IDENTIFICATION: i32 = 7;
    pub const INFERENCE: i32 = 8;
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Parse { path: path.into(), message: message.to_string() }
    }

    /// I/O failures inside the CSV layer keep their I/O class.
    pub fn csv(path: impl Into<PathBuf>, e: csv::Error) -> Self {
        let path = path.into();
        if !e.is_io_error() {
            return CliError::Parse { path, message: e.to_string() };
        }
        match e.into_kind() {
            csv::ErrorKind::Io(source) => CliError::Io { path, source },
            kind => CliError::Parse { path, message: format!("{kind:?}") },
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::MissingColumn(_) => "MISSING_COLUMN",
            CliError::UnmappedLiteral { .. } => "UNMAPPED_LITERAL",
            CliError::EmptyAfterFiltering { .. } => "EMPTY_AFTER_FILTERING",
            CliError::InvalidValue { .. } => "INVALID_VALUE",
            CliError::Schema(_) => "INVALID_SCHEMA",
            CliError::Io { .. } => "IO_ERROR",
            CliError::Parse { .. } => "PARSE_ERROR",
            CliError::Usage(_) => "USAGE_ERROR",
        }
    }

    pub fn exit_code(&self) -> i32 {
        use bicausal::Error as E;
        match self {
            CliError::Usage(_) | CliError::Core(E::Config(_)) => exit::USAGE,
            CliError::Io { .. } | CliError::Parse { .. } => exit::IO,
            CliError::MissingColumn(_)
            | CliError::UnmappedLiteral { .. }
            | CliError::EmptyAfterFiltering { .. }
            | CliError::InvalidValue { .. }
            | CliError::Schema(_) => exit::INPUT_DATA,
            CliError::Core(e) => match e {
                E::Domain(_)
                | E::DimensionMismatch(_)
                | E::InvalidParameter(_)
                | E::InfeasibleConfounderStructure { .. }
                | E::FeedbackSingular { .. }
                | E::AlignmentError { .. } => exit::INVALID_PARAMETER,
                E::SingularMatrix { .. } | E::SeparationDetected { .. } | E::RankDeficientDesign | E::NotConverged { .. } => {
                    exit::ESTIMATION
                }
                E::InfeasibleIdentification { .. }
                | E::DegenerateRatio(_)
                | E::NoRealSolution(_)
                | E::QuadraticDegenerate
                | E::Unresolved
                | E::FeasibilityBoundary { .. } => exit::IDENTIFICATION,
                E::ExcessiveFailureRate { .. } => exit::INFERENCE,
                E::Config(_) => exit::USAGE,
            },
        }
    }

    /// The machine-readable form written to stderr on failure.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Payload<'a> {
            error: &'a str,
            exit_code: i32,
            message: String,
        }
        serde_json::to_string(&Payload { error: self.code(), exit_code: self.exit_code(), message: self.to_string() })
            .expect("error payload serializes")
    }
}
