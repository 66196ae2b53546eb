//! Per-frame two-round association of detections to tracks.

mod lap;
mod tracker;

pub use lap::{solve_assignment, Assignment};
pub use tracker::{adjust_border_confidence, similarity_matrix, Track, TrackState, Tracker, TrackerConfig};
