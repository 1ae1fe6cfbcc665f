//! Seat-level classroom behavior analysis.
//!
//! Per-frame behavior boxes and body poses go in; a per-seat record of
//! hand-raising, standing, sleeping, yawning and smiling events comes out.
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
// `!(x > 0.0)` is used on purpose so NaN takes the error path
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dedup;
pub mod error;
pub mod evaluator;
pub mod ingest;
pub mod matcher;
pub mod pipeline;
pub mod seatmap;
pub mod simulator;
pub mod tracker;

pub use dedup::{iou, BehaviorEvent, Deduplicator};
pub use error::{Error, Result};
pub use ingest::{BBox, BehaviorCategory, BodyPose, ClassroomConfig, Detection, FrameRecord, Keypoint, Point};
pub use matcher::{MatchMethod, MatchResult};
pub use pipeline::{analyze, Pipeline};
pub use seatmap::{Homography, SeatId, SeatMapper};
pub use tracker::{engagement_score, ClassSession, SessionEvent, SeatTracklet};
