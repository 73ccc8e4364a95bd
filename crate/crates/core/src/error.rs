use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate or non-finite box {0:?}")]
    Degenerate([f64; 4]),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("frame size must be positive, got {0}x{1}")]
    BadFrame(f64, f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssignError {
    #[error("cost matrix {rows}x{cols} needs {} entries, got {len}", rows * cols)]
    Shape { rows: usize, cols: usize, len: usize },
    #[error("non-finite cost at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("rows have different lengths")]
    Ragged,
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("unknown expression {0}")]
    UnknownExpression(u32),
}

impl DataError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DataError::Io { path: path.into(), source }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnnotateError {
    #[error("unknown expression {0}")]
    UnknownExpression(u32),
    #[error("unknown object {0}")]
    UnknownObject(u32),
    #[error("invalid click range: start {start} > end {end}")]
    InvalidRange { start: u32, end: u32 },
    #[error("click rejected: object {object_id} has no box at frame {frame}")]
    ClickRejected { object_id: u32, frame: u32 },
    #[error("object {object_id} has no referent interval containing frame {frame}")]
    NoInterval { object_id: u32, frame: u32 },
    #[error("expression text is empty")]
    EmptyText,
}

impl AnnotateError {
    /// Stable machine-readable reason code.
    pub fn code(&self) -> &'static str {
        match self {
            AnnotateError::UnknownExpression(_) => "unknown_expression",
            AnnotateError::UnknownObject(_) => "unknown_object",
            AnnotateError::InvalidRange { .. } => "invalid_range",
            AnnotateError::ClickRejected { .. } => "click_rejected",
            AnnotateError::NoInterval { .. } => "no_interval",
            AnnotateError::EmptyText => "empty_text",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("{preds} predictions but {gts} ground-truth objects")]
    LengthMismatch { preds: usize, gts: usize },
    #[error("matching cost needs a present ground-truth object")]
    GroundTruthAbsent,
    #[error("{gts} new-born objects exceed {preds} detect predictions")]
    TooManyGroundTruths { gts: usize, preds: usize },
    #[error("no frames to sum")]
    NoFrames,
    #[error("{0} must be in [0, 1], got {1}")]
    Probability(&'static str, f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("embedding width must be {0}, got {1}")]
    Width(&'static str, usize),
    #[error("function is not finite at the evaluation point")]
    NonFinite,
}

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("frame {frame}: expected {expected_track} track + {expected_detect} detect scores, got {got_track} + {got_detect}")]
    ScoreLength {
        frame: u32,
        expected_track: usize,
        expected_detect: usize,
        got_track: usize,
        got_detect: usize,
    },
    #[error("scorer failed at frame {frame}: {message}")]
    Scorer { frame: u32, message: String },
    #[error("invalid tracker config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("ground truth is {gt_seq}/{gt_expr} but predictions are {pred_seq}/{pred_expr}")]
    Mismatch {
        gt_seq: String,
        gt_expr: u32,
        pred_seq: String,
        pred_expr: u32,
    },
    #[error("nothing to evaluate")]
    Empty,
    #[error("invalid eval config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
}
