//! Motion-only multi-object tracking toolkit.
//!
//! The numeric modules are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what file I/O, the
//! simulator, parameter search and the pipeline use.

// Index loops mirror the matrix formulas; `!(x > 0)` comparisons also reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod association;
pub mod consistency;
pub mod ensemble;
pub mod error;
pub mod fullbox;
pub mod geom;
pub mod linalg;
pub mod metrics;
pub mod moio;
pub mod motion;
pub mod pipeline;
pub mod postprocess;
pub mod scalar;
pub mod search;
pub mod sim;

pub use error::{Error, Result};
pub use geom::{iou, SceneKind, SequenceMeta};
pub use scalar::Scalar;

pub type BoundingBox = geom::BBox<f64>;
pub type Trajectory = geom::Trajectory<f64>;
pub type KalmanState = motion::KalmanState<f64>;
pub type KalmanFilter = motion::KalmanFilter<f64>;
pub type WarpMatrix = motion::WarpMatrix<f64>;
pub type WarpTable = motion::WarpTable<f64>;
pub type Tracker = association::Tracker<f64>;
pub type TrackerConfig = association::TrackerConfig<f64>;
