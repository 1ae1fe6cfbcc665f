//! Detection-stream data model and per-frame validation.
//!
//! A stream is a sequence of [`FrameRecord`]s sampled at a fixed interval
//! from a course video. Each record carries the behavior boxes emitted by an
//! upstream detector and the body poses emitted by a pose estimator.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

/// Detection categories. `Teacher` is detected but never tracked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BehaviorCategory {
    HandRaising,
    Standing,
    Sleeping,
    Yawning,
    Smiling,
    Teacher,
}

impl BehaviorCategory {
    pub const ALL: [BehaviorCategory; 6] = [
        Self::HandRaising,
        Self::Standing,
        Self::Sleeping,
        Self::Yawning,
        Self::Smiling,
        Self::Teacher,
    ];

    /// The five tracked student behaviors, in the order used by every
    /// per-category vector in this crate.
    pub const BEHAVIORS: [BehaviorCategory; 5] = [
        Self::HandRaising,
        Self::Standing,
        Self::Sleeping,
        Self::Yawning,
        Self::Smiling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::HandRaising => "hand_raising",
            Self::Standing => "standing",
            Self::Sleeping => "sleeping",
            Self::Yawning => "yawning",
            Self::Smiling => "smiling",
            Self::Teacher => "teacher",
        }
    }

    /// Position in [`BehaviorCategory::BEHAVIORS`]; `None` for `Teacher`.
    pub fn behavior_index(self) -> Option<usize> {
        Self::BEHAVIORS.iter().position(|&c| c == self)
    }

    pub fn is_positive(self) -> bool {
        matches!(self, Self::HandRaising | Self::Standing | Self::Smiling)
    }

    pub fn is_negative(self) -> bool {
        matches!(self, Self::Yawning | Self::Sleeping)
    }
}

impl fmt::Display for BehaviorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BehaviorCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown behavior category {s:?}")))
    }
}

/// Image-plane point in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(from = "[f64; 2]", into = "[f64; 2]"))]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Axis-aligned box `(x, y, w, h)`, origin at the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(from = "[f64; 4]", into = "[f64; 4]"))]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    /// Box spanning two corners, in any order.
    pub fn from_corners(a: Point, b: Point) -> Self {
        let x0 = a.x.min(b.x);
        let y0 = a.y.min(b.y);
        Self::new(x0, y0, a.x.max(b.x) - x0, a.y.max(b.y) - y0)
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> Point {
        Point::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn bottom_center(&self) -> Point {
        Point::new(self.x + self.w / 2.0, self.bottom())
    }

    pub fn is_valid(&self) -> bool {
        self.w > 0.0 && self.h > 0.0 && self.x.is_finite() && self.y.is_finite()
    }

    /// Closed containment: points on the boundary are inside.
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x && p.x <= self.right() && p.y >= self.y && p.y <= self.bottom()
    }

    /// Grows the box by `frac` of its width (height) on each side.
    pub fn expanded(&self, frac: f64) -> Self {
        let dx = self.w * frac;
        let dy = self.h * frac;
        Self::new(self.x - dx, self.y - dy, self.w + 2.0 * dx, self.h + 2.0 * dy)
    }

    /// True when the box and the `width x height` image share positive area.
    pub fn overlaps_image(&self, width: f64, height: f64) -> bool {
        self.x < width && self.right() > 0.0 && self.y < height && self.bottom() > 0.0
    }
}

impl From<[f64; 4]> for BBox {
    fn from([x, y, w, h]: [f64; 4]) -> Self {
        Self { x, y, w, h }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

/// COCO keypoint indices.
pub mod kp {
    pub const COUNT: usize = 17;
    pub const NOSE: usize = 0;
    pub const LEFT_EYE: usize = 1;
    pub const RIGHT_EYE: usize = 2;
    pub const LEFT_EAR: usize = 3;
    pub const RIGHT_EAR: usize = 4;
    pub const LEFT_SHOULDER: usize = 5;
    pub const RIGHT_SHOULDER: usize = 6;
    pub const LEFT_ELBOW: usize = 7;
    pub const RIGHT_ELBOW: usize = 8;
    pub const LEFT_WRIST: usize = 9;
    pub const RIGHT_WRIST: usize = 10;
    pub const LEFT_HIP: usize = 11;
    pub const RIGHT_HIP: usize = 12;
    pub const LEFT_KNEE: usize = 13;
    pub const RIGHT_KNEE: usize = 14;
    pub const LEFT_ANKLE: usize = 15;
    pub const RIGHT_ANKLE: usize = 16;

    /// Joints averaged into the representative point.
    pub const UPPER_BODY: [usize; 7] = [
        NOSE,
        LEFT_EYE,
        RIGHT_EYE,
        LEFT_EAR,
        RIGHT_EAR,
        LEFT_SHOULDER,
        RIGHT_SHOULDER,
    ];
    pub const SHOULDERS: [usize; 2] = [LEFT_SHOULDER, RIGHT_SHOULDER];
    pub const ELBOWS: [usize; 2] = [LEFT_ELBOW, RIGHT_ELBOW];
    pub const WRISTS: [usize; 2] = [LEFT_WRIST, RIGHT_WRIST];
}

/// One keypoint; `conf == 0` means not detected.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(from = "[f64; 3]", into = "[f64; 3]"))]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub conf: f64,
}

impl Keypoint {
    pub const MISSING: Keypoint = Keypoint { x: 0.0, y: 0.0, conf: 0.0 };

    pub const fn new(x: f64, y: f64, conf: f64) -> Self {
        Self { x, y, conf }
    }

    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

impl From<[f64; 3]> for Keypoint {
    fn from([x, y, conf]: [f64; 3]) -> Self {
        Self { x, y, conf }
    }
}

impl From<Keypoint> for [f64; 3] {
    fn from(k: Keypoint) -> Self {
        [k.x, k.y, k.conf]
    }
}

/// A 17-keypoint body pose in COCO order.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyPose {
    pub keypoints: [Keypoint; kp::COUNT],
}

impl BodyPose {
    pub fn new(keypoints: [Keypoint; kp::COUNT]) -> Self {
        Self { keypoints }
    }

    /// The keypoint at `index` when its confidence reaches `min_conf`.
    pub fn confident(&self, index: usize, min_conf: f64) -> Option<Point> {
        let k = &self.keypoints[index];
        (k.conf > 0.0 && k.conf >= min_conf).then(|| k.point())
    }

    pub fn confident_points(&self, min_conf: f64) -> impl Iterator<Item = Point> + '_ {
        (0..kp::COUNT).filter_map(move |i| self.confident(i, min_conf))
    }

    pub fn has_confident(&self, min_conf: f64) -> bool {
        self.confident_points(min_conf).next().is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Detection {
    #[cfg_attr(feature = "serde", serde(rename = "cat"))]
    pub category: BehaviorCategory,
    pub bbox: BBox,
    pub conf: f64,
}

impl Detection {
    pub fn new(category: BehaviorCategory, bbox: BBox, conf: f64) -> Self {
        Self { category, bbox, conf }
    }
}

/// One sampled frame of detector output.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame_index: u64,
    /// Seconds from course start.
    pub t: f64,
    pub detections: Vec<Detection>,
    pub poses: Vec<BodyPose>,
}

/// Camera and room geometry plus pipeline thresholds.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassroomConfig {
    pub image_w: f64,
    pub image_h: f64,
    pub rows: u32,
    pub cols: u32,
    pub k1: f64,
    pub k2: f64,
    /// Distortion center; `None` means the image center.
    pub principal_point: Option<Point>,
    /// Seating-area corners as seen in the image: TL, TR, BR, BL.
    pub rect_quad: [Point; 4],
    pub sample_interval_s: f64,
    pub iou_threshold: f64,
    pub miss_tolerance_t: u32,
    pub kp_conf_min: f64,
    pub row_origin_front: bool,
    pub col_origin_left: bool,
    pub wrist_weight: f64,
    pub elbow_weight: f64,
    /// Hand-raising box growth per side, as a fraction of its size.
    pub hand_box_expand: f64,
    /// Matching radius as a multiple of the box's longer side.
    pub r_max_factor: f64,
}

impl ClassroomConfig {
    pub const DEFAULT_SAMPLE_INTERVAL_S: f64 = 3.0;
    pub const DEFAULT_IOU_THRESHOLD: f64 = 0.2;
    pub const DEFAULT_MISS_TOLERANCE: u32 = 2;
    pub const DEFAULT_KP_CONF_MIN: f64 = 0.3;

    pub fn new(image_w: f64, image_h: f64, rows: u32, cols: u32, rect_quad: [Point; 4]) -> Self {
        Self {
            image_w,
            image_h,
            rows,
            cols,
            k1: 0.0,
            k2: 0.0,
            principal_point: None,
            rect_quad,
            sample_interval_s: Self::DEFAULT_SAMPLE_INTERVAL_S,
            iou_threshold: Self::DEFAULT_IOU_THRESHOLD,
            miss_tolerance_t: Self::DEFAULT_MISS_TOLERANCE,
            kp_conf_min: Self::DEFAULT_KP_CONF_MIN,
            row_origin_front: true,
            col_origin_left: true,
            wrist_weight: 3.0,
            elbow_weight: 2.0,
            hand_box_expand: 0.2,
            r_max_factor: 2.0,
        }
    }

    pub fn principal_point(&self) -> Point {
        self.principal_point
            .unwrap_or(Point::new(self.image_w / 2.0, self.image_h / 2.0))
    }

    pub fn image_diagonal(&self) -> f64 {
        libm::hypot(self.image_w, self.image_h)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if !(self.image_w > 0.0 && self.image_h > 0.0) {
            return bad("image size must be positive");
        }
        if self.rows < 1 || self.cols < 1 {
            return bad("rows and cols must be at least 1");
        }
        if !(self.iou_threshold > 0.0 && self.iou_threshold < 1.0) {
            return bad("iou_threshold must lie in (0, 1)");
        }
        if !(self.sample_interval_s > 0.0) {
            return bad("sample_interval_s must be positive");
        }
        if !(0.0..=1.0).contains(&self.kp_conf_min) {
            return bad("kp_conf_min must lie in [0, 1]");
        }
        if !(self.hand_box_expand >= 0.0 && self.r_max_factor > 0.0) {
            return bad("matcher geometry parameters out of range");
        }
        if !quad_is_convex(&self.rect_quad) {
            return bad("rect_quad must be convex with no three collinear points");
        }
        Ok(())
    }
}

/// Strict convexity test: every turn has the same sign and no three corners
/// are collinear.
pub fn quad_is_convex(quad: &[Point; 4]) -> bool {
    let scale = quad
        .iter()
        .flat_map(|p| [p.x.abs(), p.y.abs()])
        .fold(1.0f64, f64::max);
    let eps = 1e-12 * scale * scale;
    let mut sign = 0.0;
    for i in 0..4 {
        let a = quad[i];
        let b = quad[(i + 1) % 4];
        let c = quad[(i + 2) % 4];
        let cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
        if !cross.is_finite() || cross.abs() <= eps {
            return false;
        }
        if sign == 0.0 {
            sign = cross.signum();
        } else if cross.signum() != sign {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    BadSize,
    OutsideImage,
    BadConfidence,
}

/// What [`validate_frame`] removed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    /// Original indices of the poses that survived.
    pub kept_poses: Vec<usize>,
    pub dropped_poses: usize,
    /// Original detection index and reason for each rejected detection.
    pub rejected_detections: Vec<(usize, Rejection)>,
}

/// Filters a parsed frame: drops poses without any confident keypoint and
/// rejects detections that are malformed or lie entirely off-image.
/// Surviving elements are returned unchanged and in their original order.
pub fn validate_frame(
    rec: FrameRecord,
    cfg: &ClassroomConfig,
    prev_index: Option<u64>,
) -> Result<(FrameRecord, ValidationReport)> {
    if let Some(prev) = prev_index {
        if rec.frame_index <= prev {
            return Err(Error::FrameOrder { index: rec.frame_index, prev });
        }
    }
    let mut report = ValidationReport::default();
    let FrameRecord { frame_index, t, detections, poses } = rec;

    let detections = detections
        .into_iter()
        .enumerate()
        .filter_map(|(i, d)| {
            let reason = if !d.bbox.is_valid() {
                Some(Rejection::BadSize)
            } else if !(0.0..=1.0).contains(&d.conf) {
                Some(Rejection::BadConfidence)
            } else if !d.bbox.overlaps_image(cfg.image_w, cfg.image_h) {
                Some(Rejection::OutsideImage)
            } else {
                None
            };
            match reason {
                Some(r) => {
                    report.rejected_detections.push((i, r));
                    None
                }
                None => Some(d),
            }
        })
        .collect();

    let poses = poses
        .into_iter()
        .enumerate()
        .filter_map(|(i, p)| {
            if p.has_confident(cfg.kp_conf_min) {
                report.kept_poses.push(i);
                Some(p)
            } else {
                report.dropped_poses += 1;
                None
            }
        })
        .collect();

    Ok((FrameRecord { frame_index, t, detections, poses }, report))
}

/// Whether two consecutive sample times respect the configured interval
/// within +/-10%.
pub fn interval_ok(prev_t: f64, t: f64, cfg: &ClassroomConfig) -> bool {
    let dt = t - prev_t;
    (dt - cfg.sample_interval_s).abs() <= 0.1 * cfg.sample_interval_s + 1e-9
}
