//! Error-to-exit-code mapping. Each failure class gets a distinct code so
//! scripts can branch on them.

use l0ward_core::attack::AttackError;
use l0ward_core::detector::DetectorError;
use l0ward_core::harness::HarnessError;
use l0ward_core::image::ImageError;
use l0ward_core::nn::NnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Internal(_) => 1,
            CliError::MissingInput(_) => 2,
            CliError::BadConfig(_) => 3,
            CliError::ShapeMismatch(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Internal(_) => "internal",
            CliError::MissingInput(_) => "missing-input",
            CliError::BadConfig(_) => "bad-config",
            CliError::ShapeMismatch(_) => "shape-mismatch",
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn io_is_missing(e: &std::io::Error) -> bool {
    e.kind() == std::io::ErrorKind::NotFound
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match &e {
            NnError::ShapeMismatch { .. } | NnError::GradientMismatch { .. } => {
                CliError::ShapeMismatch(e.to_string())
            }
            NnError::Io(io) if io_is_missing(io) => CliError::MissingInput(e.to_string()),
            NnError::Format(_) => CliError::BadConfig(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<ImageError> for CliError {
    fn from(e: ImageError) -> Self {
        match &e {
            ImageError::Io { source, .. } if io_is_missing(source) => {
                CliError::MissingInput(e.to_string())
            }
            ImageError::InvalidParam(_) => CliError::BadConfig(e.to_string()),
            ImageError::BadMagic { .. } | ImageError::Truncated { .. } | ImageError::Unsupported(_) => {
                CliError::BadConfig(e.to_string())
            }
            ImageError::CountMismatch { .. } => CliError::ShapeMismatch(e.to_string()),
            ImageError::Io { .. } => CliError::Internal(e.to_string()),
        }
    }
}

impl From<AttackError> for CliError {
    fn from(e: AttackError) -> Self {
        match e {
            AttackError::Nn(inner) => inner.into(),
            AttackError::Image(inner) => inner.into(),
            AttackError::InvalidConfig(msg) => CliError::BadConfig(msg),
        }
    }
}

impl From<DetectorError> for CliError {
    fn from(e: DetectorError) -> Self {
        match e {
            DetectorError::Nn(inner) => inner.into(),
            DetectorError::Image(inner) => inner.into(),
            DetectorError::InvalidConfig(msg) => CliError::BadConfig(msg),
            DetectorError::Format(msg) => CliError::BadConfig(msg),
            DetectorError::Io(io) if io_is_missing(&io) => CliError::MissingInput(io.to_string()),
            DetectorError::Io(io) => CliError::Internal(io.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Nn(inner) => inner.into(),
            HarnessError::Image(inner) => inner.into(),
            HarnessError::Attack(inner) => inner.into(),
            HarnessError::Detector(inner) => inner.into(),
            HarnessError::Experiment(msg) => CliError::BadConfig(msg),
            HarnessError::Io { path, source } if io_is_missing(&source) => {
                CliError::MissingInput(format!("{path}: {source}"))
            }
            HarnessError::Io { path, source } => CliError::Internal(format!("{path}: {source}")),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::BadConfig(format!("config JSON: {e}"))
    }
}

/// Opens a file for reading, mapping a missing path to exit code 2.
pub fn open_input(path: &std::path::Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| {
        if io_is_missing(&e) {
            CliError::MissingInput(path.display().to_string())
        } else {
            CliError::Internal(format!("{}: {e}", path.display()))
        }
    })
}
