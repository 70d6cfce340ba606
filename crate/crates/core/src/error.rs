use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("frame tag error: expected {expected} frame, got {found}")]
    FrameTag {
        expected: &'static str,
        found: &'static str,
    },

    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("invalid transform: {0}")]
    InvalidTransform(String),

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("unknown config keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),

    #[error("waypoint index {index} out of bounds for path of {len} waypoints")]
    PathIndex { index: usize, len: usize },

    #[error("frame stream error: frame index {got} does not follow {previous}")]
    Stream { previous: u64, got: u64 },

    #[error("degenerate geometry: height difference {dz} m exceeds wheelbase {wheelbase} m")]
    DegenerateGeometry { dz: f64, wheelbase: f64 },

    #[error("bias fit error: {side} side has {count} samples, need at least 2")]
    Fit { side: &'static str, count: usize },

    #[error("numerical degeneracy: {0}")]
    Numerical(String),

    #[error("checkpoint error: extension starts at waypoint {got}, checkpoint expects {expected}")]
    Checkpoint { expected: usize, got: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("{}: {message}", location(.path, *.line))]
    Format {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn location(path: &std::path::Path, line: Option<usize>) -> String {
    match line {
        Some(line) => format!("{}:{line}", path.display()),
        None => path.display().to_string(),
    }
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(
        path: impl Into<PathBuf>,
        line: Option<usize>,
        message: impl Into<String>,
    ) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
