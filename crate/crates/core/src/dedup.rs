//! Interframe deduplication.
//!
//! A behavior usually spans several sampled frames. Boxes of the same
//! category are chained across frames by IoU; a chain that goes unmatched for
//! more than `miss_tolerance_t` consecutive frames is closed and counted as a
//! single [`BehaviorEvent`].

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ingest::{BBox, BehaviorCategory, ClassroomConfig, FrameRecord};
use crate::seatmap::SeatId;

/// Intersection over union of two boxes.
pub fn iou(a: &BBox, b: &BBox) -> Result<f64> {
    for bx in [a, b] {
        if !(bx.w > 0.0 && bx.h > 0.0) {
            return Err(Error::DegenerateBox { w: bx.w, h: bx.h });
        }
    }
    Ok(iou_unchecked(a, b))
}

pub(crate) fn iou_unchecked(a: &BBox, b: &BBox) -> f64 {
    let iw = a.right().min(b.right()) - a.x.max(b.x);
    let ih = a.bottom().min(b.bottom()) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    // areas from the same edges as the intersection, so iou(a, a) == 1
    let area = |r: &BBox| (r.right() - r.x) * (r.bottom() - r.y);
    let union = area(a) + area(b) - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// One detection absorbed into a track.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MemberBox {
    pub frame_index: u64,
    /// Index of the detection inside its (validated) frame.
    pub det_index: usize,
    pub t: f64,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveTrack {
    /// Creation order, used for tie-breaking.
    pub id: u64,
    pub category: BehaviorCategory,
    pub last_bbox: BBox,
    pub members: Vec<MemberBox>,
    pub miss_count: u32,
}

impl ActiveTrack {
    fn into_event(self) -> BehaviorEvent {
        let first = &self.members[0];
        let last = &self.members[self.members.len() - 1];
        BehaviorEvent {
            category: self.category,
            start_frame: first.frame_index,
            end_frame: last.frame_index,
            start_t: first.t,
            end_t: last.t,
            members: self.members,
            seat: None,
        }
    }
}

/// One deduplicated behavior occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorEvent {
    pub category: BehaviorCategory,
    pub start_frame: u64,
    pub end_frame: u64,
    pub start_t: f64,
    pub end_t: f64,
    /// Frame-sorted, never empty.
    pub members: Vec<MemberBox>,
    pub seat: Option<SeatId>,
}

/// Stateful IoU chainer; one per session.
#[derive(Debug, Clone)]
pub struct Deduplicator {
    tracks: Vec<ActiveTrack>,
    next_id: u64,
    iou_threshold: f64,
    miss_tolerance: u32,
}

impl Deduplicator {
    pub fn new(cfg: &ClassroomConfig) -> Self {
        Self {
            tracks: Vec::new(),
            next_id: 0,
            iou_threshold: cfg.iou_threshold,
            miss_tolerance: cfg.miss_tolerance_t,
        }
    }

    pub fn tracks(&self) -> &[ActiveTrack] {
        &self.tracks
    }

    /// Earliest frame still referenced by an open track.
    pub fn oldest_open_frame(&self) -> Option<u64> {
        self.tracks.iter().map(|t| t.members[0].frame_index).min()
    }

    /// Feeds one validated frame and returns the events closed by it, in
    /// track-creation order. Teacher detections are ignored.
    pub fn step(&mut self, frame: &FrameRecord) -> Vec<BehaviorEvent> {
        let mut matched_track = alloc::vec![false; self.tracks.len()];
        let mut new_tracks = Vec::new();

        for category in BehaviorCategory::BEHAVIORS {
            let dets: Vec<usize> = frame
                .detections
                .iter()
                .enumerate()
                .filter(|(_, d)| d.category == category)
                .map(|(i, _)| i)
                .collect();
            if dets.is_empty() {
                continue;
            }

            let mut pairs = Vec::new();
            for (ti, track) in self.tracks.iter().enumerate() {
                if track.category != category {
                    continue;
                }
                for &di in &dets {
                    let v = iou_unchecked(&track.last_bbox, &frame.detections[di].bbox);
                    if v >= self.iou_threshold {
                        pairs.push((ti, di, v));
                    }
                }
            }
            // Descending IoU; ties go to the older track, then the lower
            // detection index. Track indices follow creation order.
            pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));

            let mut det_used = alloc::vec![false; frame.detections.len()];
            for (ti, di, _) in pairs {
                if matched_track[ti] || det_used[di] {
                    continue;
                }
                matched_track[ti] = true;
                det_used[di] = true;
                let bbox = frame.detections[di].bbox;
                let track = &mut self.tracks[ti];
                track.last_bbox = bbox;
                track.miss_count = 0;
                track.members.push(MemberBox {
                    frame_index: frame.frame_index,
                    det_index: di,
                    t: frame.t,
                    bbox,
                });
            }

            for di in dets.into_iter().filter(|&di| !det_used[di]) {
                let bbox = frame.detections[di].bbox;
                new_tracks.push(ActiveTrack {
                    id: self.next_id,
                    category,
                    last_bbox: bbox,
                    members: alloc::vec![MemberBox {
                        frame_index: frame.frame_index,
                        det_index: di,
                        t: frame.t,
                        bbox,
                    }],
                    miss_count: 0,
                });
                self.next_id += 1;
            }
        }

        let mut emitted = Vec::new();
        let mut kept = Vec::with_capacity(self.tracks.len() + new_tracks.len());
        for (mut track, matched) in self.tracks.drain(..).zip(matched_track) {
            if !matched {
                track.miss_count += 1;
            }
            if track.miss_count > self.miss_tolerance {
                emitted.push(track.into_event());
            } else {
                kept.push(track);
            }
        }
        kept.extend(new_tracks);
        self.tracks = kept;
        emitted
    }

    /// Closes every open track at end of stream.
    pub fn flush(&mut self) -> Vec<BehaviorEvent> {
        self.tracks.drain(..).map(ActiveTrack::into_event).collect()
    }
}
