use std::path::PathBuf;

/// Every fallible operation in the crate reports through this type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: line {line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("value count mismatch: expected {expected}, got {actual}")]
    Length { expected: usize, actual: usize },

    #[error("point ({x}, {y}) lies outside the grid hull")]
    OutOfRange { x: f64, y: f64 },

    #[error("nodata value in interpolation support at cell ({i}, {j})")]
    DataGap { i: usize, j: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("degenerate shear layer: thickness {h_s} with plug speed {speed}")]
    DegenerateLayer { h_s: f64, speed: f64 },

    #[error("conservation fault: {what} deficit {relative:e} (relative) exceeds {limit:e}")]
    ConservationFault {
        what: &'static str,
        relative: f64,
        limit: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
