//! Behavior-to-student matching.
//!
//! Standing, sleeping, yawning and smiling boxes enclose the student who
//! performs them, so they are matched by keypoint containment. A
//! hand-raising box only covers part of a raised arm and is matched with a
//! scored greedy search over arm keypoints.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::dedup::BehaviorEvent;
use crate::error::{Error, Result};
use crate::ingest::{kp, BBox, BehaviorCategory, BodyPose, ClassroomConfig, Detection};
use crate::seatmap::{representative_point, SeatId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MatchMethod {
    KeypointContainment,
    WristElbowGreedy,
    NearestFallback,
    Unmatched,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub det_index: usize,
    /// Present iff `method != Unmatched`.
    pub pose_index: Option<usize>,
    pub score: f64,
    pub method: MatchMethod,
}

impl MatchResult {
    fn unmatched(det_index: usize) -> Self {
        Self { det_index, pose_index: None, score: 0.0, method: MatchMethod::Unmatched }
    }
}

/// Flags poses whose representative point lies inside (closed) any teacher
/// box. Poses without a confident keypoint are never flagged.
pub fn flag_teachers(poses: &[BodyPose], teacher_boxes: &[BBox], min_conf: f64) -> Vec<bool> {
    poses
        .iter()
        .map(|p| match representative_point(p, min_conf) {
            Ok(rp) => teacher_boxes.iter().any(|b| b.contains(rp)),
            Err(_) => false,
        })
        .collect()
}

fn is_candidate(flags: &[bool], i: usize) -> bool {
    !flags.get(i).copied().unwrap_or(false)
}

fn r_max(b: &BBox, cfg: &ClassroomConfig) -> f64 {
    cfg.r_max_factor * b.w.max(b.h)
}

/// Matches a whole-body behavior box (standing, sleeping, yawning, smiling).
pub fn match_body_behavior(
    det_index: usize,
    det: &Detection,
    poses: &[BodyPose],
    teacher_flags: &[bool],
    cfg: &ClassroomConfig,
) -> Result<MatchResult> {
    if matches!(det.category, BehaviorCategory::HandRaising | BehaviorCategory::Teacher) {
        return Err(Error::WrongCategory(det.category));
    }
    let center = det.bbox.center();
    let min_conf = cfg.kp_conf_min;

    // (fraction, distance, pose index)
    let mut best: Option<(f64, f64, usize)> = None;
    let mut nearest: Option<(f64, usize)> = None;
    for (i, pose) in poses.iter().enumerate() {
        if !is_candidate(teacher_flags, i) {
            continue;
        }
        let Ok(rp) = representative_point(pose, min_conf) else {
            continue;
        };
        let d = center.distance(rp);
        let (mut inside, mut total) = (0usize, 0usize);
        for p in pose.confident_points(min_conf) {
            total += 1;
            inside += det.bbox.contains(p) as usize;
        }
        if inside > 0 {
            let frac = inside as f64 / total as f64;
            let better = match best {
                None => true,
                Some((bf, bd, _)) => frac > bf || (frac == bf && d < bd),
            };
            if better {
                best = Some((frac, d, i));
            }
        }
        if nearest.is_none_or(|(nd, _)| d < nd) {
            nearest = Some((d, i));
        }
    }

    if let Some((frac, _, i)) = best {
        return Ok(MatchResult {
            det_index,
            pose_index: Some(i),
            score: frac,
            method: MatchMethod::KeypointContainment,
        });
    }
    match nearest {
        Some((d, i)) if d <= r_max(&det.bbox, cfg) => Ok(MatchResult {
            det_index,
            pose_index: Some(i),
            score: 1.0 / (1.0 + d / cfg.image_diagonal()),
            method: MatchMethod::NearestFallback,
        }),
        _ => Ok(MatchResult::unmatched(det_index)),
    }
}

/// Scored pairing between a hand-raising box and a pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandScore {
    pub score: f64,
    /// Distance from the box's bottom-center to the pose's nearest shoulder.
    pub distance: f64,
}

/// Score of one (hand-raising box, pose) pair, or `None` when the pair is
/// discarded (zero score or beyond the matching radius).
pub fn hand_raising_score(bbox: &BBox, pose: &BodyPose, cfg: &ClassroomConfig) -> Option<HandScore> {
    let min_conf = cfg.kp_conf_min;
    let grown = bbox.expanded(cfg.hand_box_expand);
    let hit = |joints: [usize; 2]| {
        joints
            .iter()
            .filter_map(|&j| pose.confident(j, min_conf))
            .any(|p| grown.contains(p))
    };
    let mut score = 0.0;
    if hit(kp::WRISTS) {
        score += cfg.wrist_weight;
    }
    if hit(kp::ELBOWS) {
        score += cfg.elbow_weight;
    }

    let anchor = bbox.bottom_center();
    let shoulder = kp::SHOULDERS
        .iter()
        .filter_map(|&j| pose.confident(j, min_conf))
        .map(|p| anchor.distance(p))
        .min_by(f64::total_cmp);
    // without shoulders, the representative point stands in
    let distance = match shoulder {
        Some(d) => d,
        None => anchor.distance(representative_point(pose, min_conf).ok()?),
    };
    score += 1.0 / (1.0 + distance / cfg.image_diagonal());

    (score > 0.0 && distance <= r_max(bbox, cfg)).then_some(HandScore { score, distance })
}

/// Greedy one-to-one assignment of hand-raising boxes to poses.
///
/// `boxes` pairs each box with its detection index in the frame. Results
/// come back in the order of `boxes`.
pub fn match_hand_raising(
    boxes: &[(usize, &Detection)],
    poses: &[BodyPose],
    teacher_flags: &[bool],
    cfg: &ClassroomConfig,
) -> Result<Vec<MatchResult>> {
    if let Some((_, d)) = boxes.iter().find(|(_, d)| d.category != BehaviorCategory::HandRaising) {
        return Err(Error::WrongCategory(d.category));
    }
    let mut pairs = Vec::new();
    for (bi, (_, det)) in boxes.iter().enumerate() {
        for (pi, pose) in poses.iter().enumerate() {
            if !is_candidate(teacher_flags, pi) {
                continue;
            }
            if let Some(s) = hand_raising_score(&det.bbox, pose, cfg) {
                pairs.push((s, pi, bi));
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.0.score
            .total_cmp(&a.0.score)
            .then(a.0.distance.total_cmp(&b.0.distance))
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut results: Vec<MatchResult> =
        boxes.iter().map(|&(di, _)| MatchResult::unmatched(di)).collect();
    let mut pose_used = alloc::vec![false; poses.len()];
    for (s, pi, bi) in pairs {
        if pose_used[pi] || results[bi].pose_index.is_some() {
            continue;
        }
        pose_used[pi] = true;
        results[bi] = MatchResult {
            det_index: boxes[bi].0,
            pose_index: Some(pi),
            score: s.score,
            method: MatchMethod::WristElbowGreedy,
        };
    }
    Ok(results)
}

/// Matches every non-teacher detection of a frame. The result is indexed by
/// detection; teacher detections map to `None`.
pub fn match_frame(
    detections: &[Detection],
    poses: &[BodyPose],
    teacher_flags: &[bool],
    cfg: &ClassroomConfig,
) -> Vec<Option<MatchResult>> {
    let mut out: Vec<Option<MatchResult>> = alloc::vec![None; detections.len()];
    let hands: Vec<(usize, &Detection)> = detections
        .iter()
        .enumerate()
        .filter(|(_, d)| d.category == BehaviorCategory::HandRaising)
        .collect();
    for r in match_hand_raising(&hands, poses, teacher_flags, cfg).expect("hand boxes filtered") {
        let i = r.det_index;
        out[i] = Some(r);
    }
    for (i, d) in detections.iter().enumerate() {
        if matches!(d.category, BehaviorCategory::HandRaising | BehaviorCategory::Teacher) {
            continue;
        }
        out[i] = Some(match_body_behavior(i, d, poses, teacher_flags, cfg).expect("category checked"));
    }
    out
}

/// Sets `event.seat` to the most frequent seat among its member boxes, with
/// ties going to the seat seen in the latest frame. `seat_of(frame, det)`
/// yields the seat of the pose matched to that detection.
pub fn assign_event_seat(
    mut event: BehaviorEvent,
    seat_of: impl Fn(u64, usize) -> Option<SeatId>,
) -> BehaviorEvent {
    let mut votes: BTreeMap<SeatId, (usize, u64)> = BTreeMap::new();
    for m in &event.members {
        if let Some(seat) = seat_of(m.frame_index, m.det_index) {
            let v = votes.entry(seat).or_insert((0, m.frame_index));
            v.0 += 1;
            v.1 = v.1.max(m.frame_index);
        }
    }
    event.seat = votes
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1))
        .map(|(seat, _)| seat);
    event
}
