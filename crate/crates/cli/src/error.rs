use std::io;
use std::path::PathBuf;

use signcorpus_annotate::StoreError;
use signcorpus_core::align::AlignError;
use signcorpus_core::corpus::CorpusError;
use signcorpus_core::metrics::MetricError;
use signcorpus_core::signal::SignalError;
use signcorpus_core::subtitle::{CleanerError, OcrError, SubtitleError};
use signcorpus_core::synth::SynthError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("missing input {}", .0.display())]
    MissingInput(PathBuf),
    #[error("{0}")]
    Data(String),
    #[error("adapter failed: {0}")]
    Adapter(String),
    /// Per-episode failures already reported; carries the worst exit code.
    #[error("{failed} of {total} episodes failed")]
    Episodes { failed: usize, total: usize, code: i32 },
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// 1 usage or configuration, 2 data, 3 external adapter.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 1,
            CliError::MissingInput(_) | CliError::Data(_) => 2,
            CliError::Adapter(_) => 3,
            CliError::Episodes { code, .. } => *code,
        }
    }

    pub fn in_context(self, context: &str) -> Self {
        match self {
            CliError::Data(m) => CliError::Data(format!("{context}: {m}")),
            CliError::Adapter(m) => CliError::Adapter(format!("{context}: {m}")),
            other => other,
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        })*
    };
}

data_error!(
    io::Error,
    SignalError,
    CorpusError,
    SubtitleError,
    AlignError,
    MetricError,
    StoreError,
    SynthError,
    serde_json::Error
);

impl From<OcrError> for CliError {
    fn from(e: OcrError) -> Self {
        CliError::Adapter(e.to_string())
    }
}

impl From<CleanerError> for CliError {
    fn from(e: CleanerError) -> Self {
        CliError::Adapter(e.to_string())
    }
}
