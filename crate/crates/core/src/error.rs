use alloc::string::String;

use crate::ingest::BehaviorCategory;
use crate::seatmap::SeatId;

/// Errors raised by the analysis core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("box has non-positive size ({w} x {h})")]
    DegenerateBox { w: f64, h: f64 },
    #[error("frame index {index} does not follow previous index {prev}")]
    FrameOrder { index: u64, prev: u64 },
    #[error("frame time {t} precedes previous time {prev}")]
    TimeOrder { t: f64, prev: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("category {0} is not accepted here")]
    WrongCategory(BehaviorCategory),
    #[error("pose has no confident keypoint")]
    NoConfidentKeypoint,
    #[error("distortion denominator {0} is degenerate")]
    DegenerateDistortion(f64),
    #[error("point correspondences are degenerate; linear system is singular")]
    SingularSystem,
    #[error("point maps to infinity (w = {0})")]
    PointAtInfinity(f64),
    #[error("k = {k} exceeds the {distinct} distinct values available")]
    InfeasibleK { k: usize, distinct: usize },
    #[error("seat {0} is outside the {1}x{2} grid")]
    SeatOutOfGrid(SeatId, u32, u32),
    #[error("time {t} outside session range [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("frame coverage mismatch: {0}")]
    Coverage(String),
    #[error("seat {0} has no ground truth")]
    SeatWithoutTruth(SeatId),
}

pub type Result<T> = core::result::Result<T, Error>;
