//! Synthetic classroom streams with exact ground truth.
//!
//! Students are placed at seat centers in the rectified top view and mapped
//! back through the inverse rectification and the lens model, so the seat
//! truth holds by construction. Behavior boxes are drawn around the joints
//! that a real detector would enclose, then the noise model is applied.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::{
    kp, quad_is_convex, BBox, BehaviorCategory, BodyPose, ClassroomConfig, Detection, FrameRecord,
    Keypoint, Point,
};
use crate::seatmap::{distort, DistortionParams, Homography, SeatId, RECTIFIED_CORNERS};

/// Confidence of clearly visible joints.
const VISIBLE: f64 = 0.9;
/// Confidence of desk-occluded joints, below the default matching floor.
const OCCLUDED: f64 = 0.2;
/// Confidence floor used for the legal-frame truth flag.
pub const LEGAL_CONF: f64 = ClassroomConfig::DEFAULT_KP_CONF_MIN;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CameraModel {
    pub image_w: f64,
    pub image_h: f64,
    /// TL, TR, BR, BL of the seating area in corrected image coordinates.
    pub rect_quad: [Point; 4],
    #[cfg_attr(feature = "serde", serde(default))]
    pub k1: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub k2: f64,
}

impl CameraModel {
    /// Camera in the front-left corner of the room.
    pub fn left_view() -> Self {
        Self {
            image_w: 1920.0,
            image_h: 1080.0,
            rect_quad: [
                Point::new(430.0, 230.0),
                Point::new(1260.0, 190.0),
                Point::new(1840.0, 930.0),
                Point::new(70.0, 1000.0),
            ],
            k1: 0.0,
            k2: 0.0,
        }
    }

    /// Camera in the front-right corner of the room.
    pub fn right_view() -> Self {
        Self {
            image_w: 1920.0,
            image_h: 1080.0,
            rect_quad: [
                Point::new(660.0, 190.0),
                Point::new(1490.0, 230.0),
                Point::new(1850.0, 1000.0),
                Point::new(80.0, 930.0),
            ],
            k1: 0.0,
            k2: 0.0,
        }
    }

    /// Wide-angle left view with barrel distortion `k1`; the seating area is
    /// kept away from the borders so distorted points stay in frame.
    pub fn wide_left_view(k1: f64) -> Self {
        Self {
            image_w: 1920.0,
            image_h: 1080.0,
            rect_quad: [
                Point::new(600.0, 300.0),
                Point::new(1250.0, 270.0),
                Point::new(1600.0, 830.0),
                Point::new(330.0, 880.0),
            ],
            k1,
            k2: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct NoiseModel {
    /// Probability that a scripted detection is missing from a frame.
    pub miss_prob: f64,
    /// Probability that a visible keypoint is dropped (conf set to 0).
    pub keypoint_dropout: f64,
    /// Standard deviation of box coordinate jitter, pixels.
    pub bbox_jitter_px: f64,
    /// Probability per frame of one spurious detection.
    pub false_positive_rate: f64,
    /// Standard deviation of student position jitter, in seat pitches.
    pub position_jitter_pitch: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScriptedEvent {
    pub seat: SeatId,
    pub category: BehaviorCategory,
    pub start_t: f64,
    pub duration_s: f64,
}

impl ScriptedEvent {
    pub fn active_at(&self, t: f64) -> bool {
        t >= self.start_t && t < self.start_t + self.duration_s
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScenarioSpec {
    pub rows: u32,
    pub cols: u32,
    pub duration_s: f64,
    pub sample_interval_s: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub vacant_seats: Vec<SeatId>,
    pub events: Vec<ScriptedEvent>,
    pub camera: CameraModel,
    #[cfg_attr(feature = "serde", serde(default))]
    pub noise: NoiseModel,
    /// Image position of a teacher standing outside the seating area.
    #[cfg_attr(feature = "serde", serde(default))]
    pub teacher_at: Option<Point>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(rows: u32, cols: u32, duration_s: f64, camera: CameraModel) -> Self {
        Self {
            rows,
            cols,
            duration_s,
            sample_interval_s: ClassroomConfig::DEFAULT_SAMPLE_INTERVAL_S,
            vacant_seats: Vec::new(),
            events: Vec::new(),
            camera,
            noise: NoiseModel::default(),
            teacher_at: None,
            seed: 0,
        }
    }

    pub fn is_occupied(&self, seat: SeatId) -> bool {
        seat.in_grid(self.rows, self.cols) && !self.vacant_seats.contains(&seat)
    }

    pub fn occupied_seats(&self) -> Vec<SeatId> {
        (1..=self.rows)
            .flat_map(|r| (1..=self.cols).map(move |c| SeatId::new(r, c)))
            .filter(|s| self.is_occupied(*s))
            .collect()
    }

    pub fn frame_count(&self) -> u64 {
        let n = libm::ceil(self.duration_s / self.sample_interval_s - 1e-9);
        if n > 0.0 { n as u64 } else { 0 }
    }

    pub fn frame_time(&self, frame: u64) -> f64 {
        frame as f64 * self.sample_interval_s
    }

    /// Analysis configuration matching this scenario's camera and room.
    pub fn config(&self) -> ClassroomConfig {
        let mut cfg = ClassroomConfig::new(
            self.camera.image_w,
            self.camera.image_h,
            self.rows,
            self.cols,
            self.camera.rect_quad,
        );
        cfg.k1 = self.camera.k1;
        cfg.k2 = self.camera.k2;
        cfg.sample_interval_s = self.sample_interval_s;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::Scenario(msg));
        if self.rows < 1 || self.cols < 1 {
            return bad("rows and cols must be at least 1".into());
        }
        if !(self.duration_s > 0.0 && self.sample_interval_s > 0.0) {
            return bad("duration and sample interval must be positive".into());
        }
        let n = &self.noise;
        for (name, p) in [
            ("miss_prob", n.miss_prob),
            ("keypoint_dropout", n.keypoint_dropout),
            ("false_positive_rate", n.false_positive_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        if !(n.bbox_jitter_px >= 0.0 && n.position_jitter_pitch >= 0.0) {
            return bad("jitter must be non-negative".into());
        }
        if !quad_is_convex(&self.camera.rect_quad) {
            return bad("camera quad must be convex".into());
        }
        if let Some(s) = self.vacant_seats.iter().find(|s| !s.in_grid(self.rows, self.cols)) {
            return bad(format!("vacant seat {s} outside the grid"));
        }
        for (i, e) in self.events.iter().enumerate() {
            if e.category == BehaviorCategory::Teacher {
                return bad(format!("event {i}: teacher is not a scriptable behavior"));
            }
            if !self.is_occupied(e.seat) {
                return bad(format!("event {i}: seat {} is not occupied", e.seat));
            }
            if !(e.start_t >= 0.0 && e.duration_s > 0.0 && e.start_t + e.duration_s <= self.duration_s) {
                return bad(format!("event {i}: outside the course duration"));
            }
            let first = libm::ceil(e.start_t / self.sample_interval_s - 1e-9);
            if !e.active_at(first * self.sample_interval_s) {
                return bad(format!("event {i}: covers no sampled frame"));
            }
            for (j, o) in self.events.iter().enumerate().skip(i + 1) {
                let overlap = o.start_t < e.start_t + e.duration_s && e.start_t < o.start_t + o.duration_s;
                if o.seat == e.seat && o.category == e.category && overlap {
                    return bad(format!("events {i} and {j} overlap"));
                }
            }
        }
        Ok(())
    }
}

/// Truth for one hand-raising box.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HandTruth {
    pub bbox: BBox,
    pub seat: SeatId,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrameTruth {
    pub frame: u64,
    /// Seat of each emitted pose; `None` for the teacher.
    pub pose_seats: Vec<Option<SeatId>>,
    /// Whether each pose is locatable (some joint at or above
    /// [`LEGAL_CONF`]).
    pub legal: Vec<bool>,
    /// Scripted (not spurious) hand-raising boxes present in the frame.
    pub hands: Vec<HandTruth>,
    /// Scripted detections before misses were applied.
    pub expected_detections: u32,
    pub false_positives: u32,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroundTruth {
    pub rows: u32,
    pub cols: u32,
    pub events: Vec<ScriptedEvent>,
    pub frames: Vec<FrameTruth>,
}

impl GroundTruth {
    /// Scripted event count per behavior, indexed like
    /// [`BehaviorCategory::BEHAVIORS`].
    pub fn event_counts(&self) -> [usize; 5] {
        let mut out = [0; 5];
        for e in &self.events {
            if let Some(i) = e.category.behavior_index() {
                out[i] += 1;
            }
        }
        out
    }
}

/// Standard normal sample (Box-Muller).
fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

fn shuffle<T, R: Rng>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// Projects rectified points into the (distorted) camera image.
struct Projector {
    to_image: Homography,
    lens: DistortionParams,
}

impl Projector {
    fn new(spec: &ScenarioSpec) -> Result<Self> {
        let cfg = spec.config();
        Ok(Self {
            to_image: Homography::solve(&RECTIFIED_CORNERS, &spec.camera.rect_quad)?,
            lens: DistortionParams::from_config(&cfg),
        })
    }

    fn project(&self, q: Point) -> Result<Point> {
        distort(self.to_image.apply(q)?, &self.lens)
    }
}

/// Joint layout of a seated student in body units (y grows downward),
/// shifted so the upper-body mean sits at the origin.
fn seated_layout() -> [(f64, f64, f64); kp::COUNT] {
    let mut l = [(0.0, 0.0, 0.0); kp::COUNT];
    l[kp::NOSE] = (0.0, -0.55, VISIBLE);
    l[kp::LEFT_EYE] = (-0.12, -0.65, VISIBLE);
    l[kp::RIGHT_EYE] = (0.12, -0.65, VISIBLE);
    l[kp::LEFT_EAR] = (-0.25, -0.6, VISIBLE);
    l[kp::RIGHT_EAR] = (0.25, -0.6, VISIBLE);
    l[kp::LEFT_SHOULDER] = (-0.5, 0.0, VISIBLE);
    l[kp::RIGHT_SHOULDER] = (0.5, 0.0, VISIBLE);
    l[kp::LEFT_ELBOW] = (-0.6, 0.7, OCCLUDED);
    l[kp::RIGHT_ELBOW] = (0.6, 0.7, OCCLUDED);
    l[kp::LEFT_WRIST] = (-0.35, 1.1, OCCLUDED);
    l[kp::RIGHT_WRIST] = (0.35, 1.1, OCCLUDED);
    l[kp::LEFT_HIP] = (-0.3, 1.4, OCCLUDED);
    l[kp::RIGHT_HIP] = (0.3, 1.4, OCCLUDED);
    let my = kp::UPPER_BODY.iter().map(|&i| l[i].1).sum::<f64>() / kp::UPPER_BODY.len() as f64;
    for j in l.iter_mut() {
        j.1 -= my;
    }
    l
}

struct Student {
    seat: SeatId,
    /// Representative point in the image.
    anchor: Point,
    /// Body unit in pixels.
    unit: f64,
    raise_side: f64,
}

impl Student {
    fn joint(&self, layout: &[(f64, f64, f64); kp::COUNT], i: usize) -> Point {
        Point::new(self.anchor.x + layout[i].0 * self.unit, self.anchor.y + layout[i].1 * self.unit)
    }
}

/// Builds the pose and behavior boxes of one student for the active
/// behaviors.
fn render_student(student: &Student, active: &[BehaviorCategory]) -> (BodyPose, Vec<(BehaviorCategory, BBox)>) {
    let mut layout = seated_layout();
    let u = student.unit;
    let raising = active.contains(&BehaviorCategory::HandRaising);
    let standing = active.contains(&BehaviorCategory::Standing);
    let (elbow, wrist, shoulder) = if student.raise_side > 0.0 {
        (kp::RIGHT_ELBOW, kp::RIGHT_WRIST, kp::RIGHT_SHOULDER)
    } else {
        (kp::LEFT_ELBOW, kp::LEFT_WRIST, kp::LEFT_SHOULDER)
    };
    if raising {
        let (sx, sy, _) = layout[shoulder];
        layout[elbow] = (sx + 0.15 * student.raise_side, sy - 0.9, VISIBLE);
        layout[wrist] = (sx + 0.2 * student.raise_side, sy - 1.8, VISIBLE);
    }
    if standing {
        let hip_y = layout[kp::LEFT_SHOULDER].1 + 1.6;
        layout[kp::LEFT_HIP] = (-0.3, hip_y, VISIBLE);
        layout[kp::RIGHT_HIP] = (0.3, hip_y, VISIBLE);
    }

    let mut kps = [Keypoint::MISSING; kp::COUNT];
    for (i, k) in kps.iter_mut().enumerate() {
        if layout[i].2 > 0.0 {
            let p = student.joint(&layout, i);
            *k = Keypoint::new(p.x, p.y, layout[i].2);
        }
    }

    let mut boxes = Vec::new();
    for &cat in active {
        let b = match cat {
            BehaviorCategory::HandRaising => {
                let w = student.joint(&layout, wrist);
                let e = student.joint(&layout, elbow);
                let top = w.y - 0.5 * u;
                let bottom = e.y - 0.15 * u;
                BBox::new(w.x - 0.35 * u, top, 0.7 * u, bottom - top)
            }
            BehaviorCategory::Standing => {
                let top = student.joint(&layout, kp::LEFT_EYE).y - 0.45 * u;
                let bottom = student.joint(&layout, kp::LEFT_HIP).y + 0.2 * u;
                BBox::new(student.anchor.x - 0.7 * u, top, 1.4 * u, bottom - top)
            }
            BehaviorCategory::Sleeping => {
                let sh = student.joint(&layout, kp::LEFT_SHOULDER).y;
                BBox::new(student.anchor.x - 0.8 * u, sh - 0.3 * u, 1.6 * u, 1.2 * u)
            }
            BehaviorCategory::Yawning | BehaviorCategory::Smiling => {
                let face = [kp::NOSE, kp::LEFT_EYE, kp::RIGHT_EYE, kp::LEFT_EAR, kp::RIGHT_EAR];
                let cy = face.iter().map(|&i| student.joint(&layout, i).y).sum::<f64>() / 5.0;
                BBox::new(student.anchor.x - 0.4 * u, cy - 0.4 * u, 0.8 * u, 0.8 * u)
            }
            BehaviorCategory::Teacher => continue,
        };
        boxes.push((cat, b));
    }
    (BodyPose::new(kps), boxes)
}

fn teacher_pose(at: Point, unit: f64) -> (BodyPose, BBox) {
    let mut layout = seated_layout();
    layout[kp::LEFT_WRIST] = (-0.45, 1.5, VISIBLE);
    layout[kp::RIGHT_WRIST] = (0.45, 1.5, VISIBLE);
    layout[kp::LEFT_ELBOW] = (-0.55, 0.8, VISIBLE);
    layout[kp::RIGHT_ELBOW] = (0.55, 0.8, VISIBLE);
    layout[kp::LEFT_HIP] = (-0.3, 1.8, VISIBLE);
    layout[kp::RIGHT_HIP] = (0.3, 1.8, VISIBLE);
    layout[kp::LEFT_KNEE] = (-0.3, 2.9, VISIBLE);
    layout[kp::RIGHT_KNEE] = (0.3, 2.9, VISIBLE);
    layout[kp::LEFT_ANKLE] = (-0.3, 4.0, VISIBLE);
    layout[kp::RIGHT_ANKLE] = (0.3, 4.0, VISIBLE);
    let mut kps = [Keypoint::MISSING; kp::COUNT];
    for (i, k) in kps.iter_mut().enumerate() {
        *k = Keypoint::new(at.x + layout[i].0 * unit, at.y + layout[i].1 * unit, layout[i].2);
    }
    let top = at.y - 1.2 * unit;
    let bbox = BBox::new(at.x - 0.8 * unit, top, 1.6 * unit, 5.4 * unit);
    (BodyPose::new(kps), bbox)
}

fn jitter_box<R: Rng>(b: BBox, sigma: f64, rng: &mut R) -> BBox {
    if sigma == 0.0 {
        return b;
    }
    BBox::new(
        b.x + sigma * gaussian(rng),
        b.y + sigma * gaussian(rng),
        (b.w + sigma * gaussian(rng)).max(1.0),
        (b.h + sigma * gaussian(rng)).max(1.0),
    )
}

fn drop_keypoints<R: Rng>(pose: &mut BodyPose, p: f64, rng: &mut R) {
    if p == 0.0 {
        return;
    }
    for k in pose.keypoints.iter_mut() {
        if k.conf > 0.0 && rng.random_bool(p) {
            *k = Keypoint::MISSING;
        }
    }
}

fn inside_image(p: Point, cam: &CameraModel) -> bool {
    p.x >= 0.0 && p.x <= cam.image_w && p.y >= 0.0 && p.y <= cam.image_h
}

/// Generates the detection stream and its ground truth. Deterministic for
/// a given `(spec, seed)`.
pub fn generate(spec: &ScenarioSpec, seed: u64) -> Result<(Vec<FrameRecord>, GroundTruth)> {
    spec.validate()?;
    let proj = Projector::new(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, cols) = (spec.rows as f64, spec.cols as f64);
    let seat_center = |s: SeatId| Point::new((s.col as f64 - 0.5) / cols, (s.row as f64 - 0.5) / rows);

    // body unit from the local column pitch at each seat
    let seats = spec.occupied_seats();
    let mut units = Vec::with_capacity(seats.len());
    for &s in &seats {
        let q = seat_center(s);
        let a = proj.project(Point::new(q.x - 0.5 / cols, q.y))?;
        let b = proj.project(Point::new(q.x + 0.5 / cols, q.y))?;
        let c = proj.project(q)?;
        if !inside_image(c, &spec.camera) {
            return Err(Error::Scenario(format!("seat {s} projects outside the image")));
        }
        units.push(0.3 * a.distance(b));
    }
    let teacher_unit = units.iter().copied().fold(0.0, f64::max) * 1.1;

    let noise = &spec.noise;
    let mut frames = Vec::new();
    let mut truth = GroundTruth { rows: spec.rows, cols: spec.cols, events: spec.events.clone(), frames: Vec::new() };

    for f in 0..spec.frame_count() {
        let t = spec.frame_time(f);
        let mut poses: Vec<(BodyPose, Option<SeatId>)> = Vec::new();
        let mut dets: Vec<Detection> = Vec::new();
        let mut hands = Vec::new();
        let mut expected = 0u32;

        for (&seat, &unit) in seats.iter().zip(&units) {
            let mut q = seat_center(seat);
            if noise.position_jitter_pitch > 0.0 {
                q.x += noise.position_jitter_pitch / cols * gaussian(&mut rng);
                q.y += noise.position_jitter_pitch / rows * gaussian(&mut rng);
            }
            let student = Student {
                seat,
                anchor: proj.project(q)?,
                unit,
                raise_side: if seat.col % 2 == 0 { 1.0 } else { -1.0 },
            };
            let mut active: Vec<BehaviorCategory> = spec
                .events
                .iter()
                .filter(|e| e.seat == seat && e.active_at(t))
                .map(|e| e.category)
                .collect();
            active.sort();
            let (mut pose, boxes) = render_student(&student, &active);
            drop_keypoints(&mut pose, noise.keypoint_dropout, &mut rng);
            poses.push((pose, Some(student.seat)));
            for (cat, b) in boxes {
                expected += 1;
                if cat == BehaviorCategory::HandRaising {
                    hands.push(HandTruth { bbox: b, seat });
                }
                if noise.miss_prob > 0.0 && rng.random_bool(noise.miss_prob) {
                    continue;
                }
                dets.push(Detection::new(cat, jitter_box(b, noise.bbox_jitter_px, &mut rng), VISIBLE));
            }
        }

        if let Some(at) = spec.teacher_at {
            let (mut pose, b) = teacher_pose(at, teacher_unit);
            drop_keypoints(&mut pose, noise.keypoint_dropout, &mut rng);
            poses.push((pose, None));
            expected += 1;
            if !(noise.miss_prob > 0.0 && rng.random_bool(noise.miss_prob)) {
                dets.push(Detection::new(
                    BehaviorCategory::Teacher,
                    jitter_box(b, noise.bbox_jitter_px, &mut rng),
                    VISIBLE,
                ));
            }
        }

        let mut false_positives = 0;
        if noise.false_positive_rate > 0.0 && rng.random_bool(noise.false_positive_rate) {
            let cat = BehaviorCategory::BEHAVIORS[rng.random_range(0..5)];
            let w = rng.random_range(20.0..120.0);
            let h = rng.random_range(20.0..120.0);
            let x = rng.random_range(0.0..spec.camera.image_w - w);
            let y = rng.random_range(0.0..spec.camera.image_h - h);
            dets.push(Detection::new(cat, BBox::new(x, y, w, h), 0.5));
            false_positives = 1;
        }

        shuffle(&mut poses, &mut rng);
        shuffle(&mut dets, &mut rng);
        let legal = poses
            .iter()
            .map(|(p, s)| s.is_some() && p.has_confident(LEGAL_CONF))
            .collect();
        truth.frames.push(FrameTruth {
            frame: f,
            pose_seats: poses.iter().map(|(_, s)| *s).collect(),
            legal,
            hands,
            expected_detections: expected,
            false_positives,
        });
        frames.push(FrameRecord {
            frame_index: f,
            t,
            detections: dets,
            poses: poses.into_iter().map(|(p, _)| p).collect(),
        });
    }
    Ok((frames, truth))
}

/// Knobs for [`random_script`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptOptions {
    pub events: usize,
    /// Relative weight of each behavior, indexed like
    /// [`BehaviorCategory::BEHAVIORS`].
    pub weights: [f64; 5],
    pub min_frames: u64,
    pub max_frames: u64,
    /// Idle frames required between two events at the same seat.
    pub gap_frames: u64,
}

impl Default for ScriptOptions {
    fn default() -> Self {
        Self { events: 60, weights: [1.0; 5], min_frames: 1, max_frames: 4, gap_frames: 4 }
    }
}

/// Scatters non-overlapping events over the occupied seats: at most one
/// behavior per seat at a time, separated by `gap_frames` idle frames.
/// Gives up quietly when the room is too full.
pub fn random_script(spec: &ScenarioSpec, opts: &ScriptOptions, seed: u64) -> Vec<ScriptedEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seats = spec.occupied_seats();
    let n_frames = spec.frame_count();
    let total_w: f64 = opts.weights.iter().sum();
    if seats.is_empty() || n_frames == 0 || !(total_w > 0.0) {
        return Vec::new();
    }
    // busy[seat] = list of (first, last) frame spans
    let mut busy: Vec<Vec<(u64, u64)>> = alloc::vec![Vec::new(); seats.len()];
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < opts.events && attempts < opts.events * 200 {
        attempts += 1;
        let si = rng.random_range(0..seats.len());
        let len = rng.random_range(opts.min_frames..=opts.max_frames.max(opts.min_frames));
        if len > n_frames {
            continue;
        }
        let first = rng.random_range(0..=n_frames - len);
        let last = first + len - 1;
        let clear = busy[si]
            .iter()
            .all(|&(a, b)| last + opts.gap_frames < a || b + opts.gap_frames < first);
        if !clear {
            continue;
        }
        let mut pick = rng.random::<f64>() * total_w;
        let mut ci = 0;
        while ci < 4 && pick >= opts.weights[ci] {
            pick -= opts.weights[ci];
            ci += 1;
        }
        busy[si].push((first, last));
        out.push(ScriptedEvent {
            seat: seats[si],
            category: BehaviorCategory::BEHAVIORS[ci],
            start_t: spec.frame_time(first),
            duration_s: len as f64 * spec.sample_interval_s,
        });
    }
    out.sort_by(|a, b| a.start_t.total_cmp(&b.start_t).then(a.seat.cmp(&b.seat)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dedup::iou;
    use alloc::vec;

    fn spec() -> ScenarioSpec {
        let mut s = ScenarioSpec::new(5, 7, 120.0, CameraModel::left_view());
        s.events = vec![ScriptedEvent {
            seat: SeatId::new(2, 7),
            category: BehaviorCategory::HandRaising,
            start_t: 9.0,
            duration_s: 9.0,
        }];
        s
    }

    #[test]
    fn deterministic_for_seed() {
        let mut s = spec();
        s.noise = NoiseModel {
            miss_prob: 0.1,
            keypoint_dropout: 0.2,
            bbox_jitter_px: 2.0,
            false_positive_rate: 0.05,
            position_jitter_pitch: 0.05,
        };
        assert_eq!(generate(&s, 7).unwrap(), generate(&s, 7).unwrap());
        assert_ne!(generate(&s, 7).unwrap().0, generate(&s, 8).unwrap().0);
    }

    #[test]
    fn full_miss_leaves_poses_only() {
        let mut s = spec();
        s.noise.miss_prob = 1.0;
        let (frames, _) = generate(&s, 1).unwrap();
        assert_eq!(frames.len(), 40);
        assert!(frames.iter().all(|f| f.detections.is_empty() && f.poses.len() == 35));
    }

    #[test]
    fn clean_event_frames() {
        let (frames, truth) = generate(&spec(), 0).unwrap();
        let with_hand: Vec<u64> = frames
            .iter()
            .filter(|f| f.detections.iter().any(|d| d.category == BehaviorCategory::HandRaising))
            .map(|f| f.frame_index)
            .collect();
        assert_eq!(with_hand, vec![3, 4, 5]);
        assert_eq!(truth.frames[4].hands.len(), 1);
        assert!(truth.frames.iter().all(|f| f.legal.iter().all(|&l| l)));
    }

    #[test]
    fn rejects_infeasible_specs() {
        let mut s = spec();
        s.events[0].seat = SeatId::new(6, 1);
        assert!(s.validate().is_err());
        let mut s = spec();
        s.vacant_seats.push(SeatId::new(2, 7));
        assert!(s.validate().is_err());
        let mut s = spec();
        s.events[0].start_t = 115.0;
        assert!(s.validate().is_err());
        let mut s = spec();
        s.events[0].start_t = 9.5;
        s.events[0].duration_s = 1.0;
        assert!(s.validate().is_err());
        let mut s = spec();
        s.noise.miss_prob = 1.5;
        assert!(s.validate().is_err());
        let mut s = spec();
        let mut dup = s.events[0].clone();
        dup.start_t = 12.0;
        s.events.push(dup);
        assert!(s.validate().is_err());
        let mut s = spec();
        s.events[0].category = BehaviorCategory::Teacher;
        assert!(s.validate().is_err());
    }

    #[test]
    fn neighbouring_boxes_do_not_chain() {
        // every behavior active everywhere: same-category boxes of different
        // seats must stay below the IoU threshold
        for cam in [CameraModel::left_view(), CameraModel::right_view(), CameraModel::wide_left_view(0.1)] {
            let mut s = ScenarioSpec::new(5, 7, 3.0, cam);
            for seat in s.occupied_seats() {
                for cat in BehaviorCategory::BEHAVIORS {
                    s.events.push(ScriptedEvent { seat, category: cat, start_t: 0.0, duration_s: 3.0 });
                }
            }
            let (frames, _) = generate(&s, 0).unwrap();
            let dets = &frames[0].detections;
            assert_eq!(dets.len(), 35 * 5);
            for (i, a) in dets.iter().enumerate() {
                assert!(a.bbox.overlaps_image(1920.0, 1080.0));
                for b in &dets[i + 1..] {
                    if a.category == b.category {
                        assert!(iou(&a.bbox, &b.bbox).unwrap() < 0.2, "{:?} {:?}", a, b);
                    }
                }
            }
        }
    }

    #[test]
    fn script_respects_gaps() {
        let s = ScenarioSpec::new(5, 7, 2400.0, CameraModel::left_view());
        let ev = random_script(&s, &ScriptOptions { events: 300, ..Default::default() }, 3);
        assert_eq!(ev.len(), 300);
        let mut with = s.clone();
        with.events = ev;
        with.validate().unwrap();
    }
}
