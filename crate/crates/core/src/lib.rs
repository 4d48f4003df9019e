//! Exploration planning on 2D occupancy grids with pathwise information
//! gain: the robot scores each frontier by the predicted-map uncertainty its
//! sensor would cover along the whole path to it, not just at the endpoint.

pub mod error;
pub mod frontier;
pub mod geometry;
pub mod gridmap;
pub mod ingestion;
pub mod metrics;
pub mod pathing;
pub mod planners;
pub mod predictor;
pub mod scenarios;
pub mod simulator;

pub use error::{Error, Result};
