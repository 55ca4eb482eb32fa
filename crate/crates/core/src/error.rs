use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("linear solver did not converge: {iterations} iterations, relative residual {residual:e}")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("shape is not strictly inside the computational box")]
    ShapeOutsideBox,

    #[error("cell region touches the box boundary")]
    RegionTouchesBoundary,

    #[error("cell region is larger than the computational box")]
    CellLargerThanBox,

    #[error("cell region is empty")]
    EmptyRegion,

    #[error("cell ({i}, {j}) has positive area but no field value")]
    MissingValue { i: usize, j: usize },

    #[error("no interior data near interface point ({x}, {y})")]
    NoInteriorData { x: f64, y: f64 },

    #[error("newly covered cell ({i}, {j}) has no valid neighbor to extrapolate from")]
    IsolatedNewCell { i: usize, j: usize },

    #[error("cell ({i}, {j}) has positive area but no flux connection")]
    DisconnectedCell { i: usize, j: usize },

    #[error("trajectory too short: {samples} usable samples, need {needed}")]
    TooShort { samples: usize, needed: usize },

    #[error("parse error{}: {message}", location(.line, .key))]
    Parse {
        line: Option<usize>,
        key: Option<String>,
        message: String,
    },

    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("step {step} (t = {t}): {source}{}", dump_note(.dump))]
    Step {
        step: usize,
        t: f64,
        dump: Option<PathBuf>,
        #[source]
        source: Box<Error>,
    },
}

fn location(line: &Option<usize>, key: &Option<String>) -> String {
    match (line, key) {
        (Some(l), Some(k)) => format!(" at line {l}, key `{k}`"),
        (Some(l), None) => format!(" at line {l}"),
        (None, Some(k)) => format!(" at key `{k}`"),
        (None, None) => String::new(),
    }
}

fn dump_note(dump: &Option<PathBuf>) -> String {
    dump.as_ref().map(|p| format!(" (state written to {})", p.display())).unwrap_or_default()
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics (as opposed to bad input or IO).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Step { source, .. } => source.is_numerical(),
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::Format(_)
            | Error::DimensionMismatch { .. }
            | Error::Io { .. }
            | Error::TooShort { .. } => false,
            _ => true,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
