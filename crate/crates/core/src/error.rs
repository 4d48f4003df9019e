use thiserror::Error;

use crate::gridmap::Cell;

/// Errors produced by the exploration kernel.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid geometry: {0}")]
    InvalidGeometry(String),

    #[error("cell ({x}, {y}) is outside the {width}x{height} grid")]
    OutOfBounds {
        x: i64,
        y: i64,
        width: usize,
        height: usize,
    },

    #[error("grid geometries differ: {0}")]
    GeometryMismatch(String),

    #[error("pose {0:?} lies on an occupied cell")]
    PoseInWall(Cell),

    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),

    #[error("empty path")]
    EmptyPath,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("graymap: {0}")]
    Graymap(String),

    #[error("floorplan: {0}")]
    Floorplan(String),

    #[error("predictor: {0}")]
    Predictor(String),

    #[error("predictor timed out after {0:?}")]
    PredictorTimeout(std::time::Duration),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
