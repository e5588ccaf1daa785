use thiserror::Error;

/// Exit codes, one per failure class.
pub mod exit {
    pub const OK: i32 = 0;
    /// Command-line usage errors (reported by clap).
    pub const USAGE: i32 = 2;
    pub const PARSE: i32 = 3;
    pub const FORMAT: i32 = 4;
    pub const SCHEMA: i32 = 5;
    pub const RUNTIME: i32 = 6;
    pub const VERIFY: i32 = 7;
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Raw log lines that do not parse, as `file:line: message`.
    #[error("parse error: {0}")]
    Parse(String),
    /// Malformed spectrogram or manifest files.
    #[error("format error: {0}")]
    Format(String),
    /// Invalid configuration; every offending field is listed.
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Schema(Vec<String>),
    #[error("{0}")]
    Runtime(String),
    /// Dataset verification found problems.
    #[error("verification failed: {0}")]
    Verify(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => exit::PARSE,
            CliError::Format(_) => exit::FORMAT,
            CliError::Schema(_) => exit::SCHEMA,
            CliError::Runtime(_) => exit::RUNTIME,
            CliError::Verify(_) => exit::VERIFY,
        }
    }

    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Runtime(format!("{}: {e}", path.display()))
    }
}

impl From<csiaug_core::file::FormatError> for CliError {
    fn from(e: csiaug_core::file::FormatError) -> Self {
        match e {
            csiaug_core::file::FormatError::Io { .. } => CliError::Runtime(e.to_string()),
            csiaug_core::file::FormatError::Invalid { .. } => CliError::Format(e.to_string()),
        }
    }
}

impl From<csiaug_core::dataset::manifest::ManifestError> for CliError {
    fn from(e: csiaug_core::dataset::manifest::ManifestError) -> Self {
        use csiaug_core::dataset::manifest::ManifestError as M;
        match e {
            M::Io { .. } => CliError::Runtime(e.to_string()),
            M::Format(f) => f.into(),
            M::Json { .. } | M::Unlabeled(_) => CliError::Format(e.to_string()),
        }
    }
}
