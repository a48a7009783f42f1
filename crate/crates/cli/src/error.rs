use std::fmt;
use std::path::Path;

use beat_core::annotation::AnnotationError;
use beat_core::beatsig::BeatError;
use beat_core::metrics::MetricError;
use beat_core::motion::MotionError;
use camn::CamnError;
use ndiff::NdError;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn parse(message: impl Into<String>) -> CliError {
        CliError {
            code: EXIT_PARSE,
            message: message.into(),
        }
    }

    pub fn mismatch(message: impl Into<String>) -> CliError {
        CliError {
            code: EXIT_MISMATCH,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> CliError {
        CliError {
            code: EXIT_NUMERIC,
            message: message.into(),
        }
    }

    pub fn other(message: impl Into<String>) -> CliError {
        CliError {
            code: EXIT_OTHER,
            message: message.into(),
        }
    }

    /// Prefixes the message with a file name, keeping the code.
    pub fn in_file(self, path: &Path) -> CliError {
        CliError {
            code: self.code,
            message: format!("{}: {}", path.display(), self.message),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::other(e.to_string())
    }
}

impl From<MotionError> for CliError {
    fn from(e: MotionError) -> CliError {
        let code = match e {
            MotionError::Parse { .. }
            | MotionError::Json(_)
            | MotionError::UnknownRotationOrder(_)
            | MotionError::UnsupportedAudio(_)
            | MotionError::TruncatedAudio
            | MotionError::NoWordTier
            | MotionError::MissingChannel(_)
            | MotionError::OverlappingIntervals { .. }
            | MotionError::UnsortedIntervals { .. } => EXIT_PARSE,
            MotionError::Invalid(_) => EXIT_MISMATCH,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<AnnotationError> for CliError {
    fn from(e: AnnotationError) -> CliError {
        let code = match e {
            AnnotationError::LengthMismatch(..) | AnnotationError::NoTracks => EXIT_MISMATCH,
            _ => EXIT_PARSE,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<BeatError> for CliError {
    fn from(e: BeatError) -> CliError {
        let code = match e {
            BeatError::NotIncreasing => EXIT_PARSE,
            BeatError::Invalid(ref m) if m.starts_with("line") => EXIT_PARSE,
            _ => EXIT_MISMATCH,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> CliError {
        let code = match e {
            MetricError::NonFinite => EXIT_NUMERIC,
            MetricError::Invalid(ref m) if m.starts_with("line") => EXIT_PARSE,
            _ => EXIT_MISMATCH,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<NdError> for CliError {
    fn from(e: NdError) -> CliError {
        let code = match e {
            NdError::NonFinite(_) | NdError::LogDomain(_) => EXIT_NUMERIC,
            NdError::Checkpoint(_) => EXIT_PARSE,
            _ => EXIT_MISMATCH,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<CamnError> for CliError {
    fn from(e: CamnError) -> CliError {
        match e {
            CamnError::Numeric(nd) => nd.into(),
            CamnError::WordTable { .. } => CliError::parse(e.to_string()),
            CamnError::Config(_) => CliError::other(e.to_string()),
            _ => CliError::mismatch(e.to_string()),
        }
    }
}

/// Reads a UTF-8 file, naming it in any error.
pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::other(format!("{}: {e}", path.display())))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::other(format!("{}: {e}", path.display())))
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::other(format!("{}: {e}", path.display())))
}
