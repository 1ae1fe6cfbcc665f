//! Streaming driver: validate -> flag teachers -> locate seats -> match
//! behaviors -> deduplicate -> accumulate.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dedup::{BehaviorEvent, Deduplicator};
use crate::error::{Error, Result};
use crate::ingest::{interval_ok, validate_frame, BehaviorCategory, ClassroomConfig, FrameRecord};
use crate::matcher::{assign_event_seat, flag_teachers, match_frame};
use crate::seatmap::{SeatId, SeatMapper};
use crate::tracker::{ClassSession, FrameObservation, HandObservation};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PipelineStats {
    pub frames: u64,
    pub dropped_poses: u64,
    pub rejected_detections: u64,
    /// Consecutive records further apart than the sample interval +/-10%.
    pub irregular_intervals: u64,
    pub events: u64,
}

/// Per-frame results returned by [`Pipeline::push_frame`].
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub observation: FrameObservation,
    /// Events closed by this frame, seats assigned.
    pub closed: Vec<BehaviorEvent>,
}

/// Incremental analysis of one course.
#[derive(Debug, Clone)]
pub struct Pipeline {
    cfg: ClassroomConfig,
    mapper: SeatMapper,
    dedup: Deduplicator,
    session: ClassSession,
    /// Seat of the pose matched to each detection, per frame still
    /// referenced by an open track.
    det_seats: BTreeMap<u64, Vec<Option<SeatId>>>,
    prev: Option<(u64, f64)>,
    stats: PipelineStats,
    keep_observations: bool,
}

impl Pipeline {
    pub fn new(cfg: ClassroomConfig, course_id: impl Into<String>) -> Result<Self> {
        let mapper = SeatMapper::new(&cfg)?;
        let dedup = Deduplicator::new(&cfg);
        let session = ClassSession::new(cfg.clone(), course_id)?;
        Ok(Self {
            cfg,
            mapper,
            dedup,
            session,
            det_seats: BTreeMap::new(),
            prev: None,
            stats: PipelineStats::default(),
            keep_observations: true,
        })
    }

    /// Disables per-frame observations in the session (they are only needed
    /// for evaluation).
    pub fn without_observations(mut self) -> Self {
        self.keep_observations = false;
        self
    }

    pub fn config(&self) -> &ClassroomConfig {
        &self.cfg
    }

    pub fn mapper(&self) -> &SeatMapper {
        &self.mapper
    }

    pub fn stats(&self) -> PipelineStats {
        self.stats
    }

    /// Current state; only closed events are included.
    pub fn session(&self) -> &ClassSession {
        &self.session
    }

    pub fn push_frame(&mut self, rec: FrameRecord) -> Result<FrameOutcome> {
        let n_input_poses = rec.poses.len();
        if let Some((_, prev_t)) = self.prev {
            if rec.t < prev_t {
                return Err(Error::TimeOrder { t: rec.t, prev: prev_t });
            }
            if !interval_ok(prev_t, rec.t, &self.cfg) {
                self.stats.irregular_intervals += 1;
            }
        }
        let (frame, report) = validate_frame(rec, &self.cfg, self.prev.map(|p| p.0))?;
        self.prev = Some((frame.frame_index, frame.t));
        self.stats.frames += 1;
        self.stats.dropped_poses += report.dropped_poses as u64;
        self.stats.rejected_detections += report.rejected_detections.len() as u64;

        let teacher_boxes: Vec<_> = frame
            .detections
            .iter()
            .filter(|d| d.category == BehaviorCategory::Teacher)
            .map(|d| d.bbox)
            .collect();
        let flags = flag_teachers(&frame.poses, &teacher_boxes, self.cfg.kp_conf_min);
        let seats = self.mapper.assign_seats(&frame.poses, &flags);
        for seat in seats.iter().flatten() {
            self.session.mark_occupied(*seat)?;
        }

        let matches = match_frame(&frame.detections, &frame.poses, &flags, &self.cfg);
        let det_seats: Vec<Option<SeatId>> = matches
            .iter()
            .map(|m| m.as_ref().and_then(|m| m.pose_index).and_then(|p| seats[p]))
            .collect();

        let mut observation = FrameObservation {
            frame: frame.frame_index,
            t: frame.t,
            pose_seats: alloc::vec![None; n_input_poses],
            hands: Vec::new(),
        };
        for (kept, seat) in report.kept_poses.iter().zip(&seats) {
            observation.pose_seats[*kept] = *seat;
        }
        for (i, d) in frame.detections.iter().enumerate() {
            if d.category == BehaviorCategory::HandRaising {
                let matched = matches[i].as_ref().is_some_and(|m| m.pose_index.is_some());
                observation.hands.push(HandObservation { bbox: d.bbox, matched, seat: det_seats[i] });
            }
        }

        self.det_seats.insert(frame.frame_index, det_seats);
        let closed = self.dedup.step(&frame);
        let closed = self.settle(closed)?;
        self.prune();

        self.session.set_duration(frame.t + self.cfg.sample_interval_s);
        if self.keep_observations {
            self.session.observations.push(observation.clone());
        }
        Ok(FrameOutcome { observation, closed })
    }

    fn settle(&mut self, events: Vec<BehaviorEvent>) -> Result<Vec<BehaviorEvent>> {
        let mut out = Vec::with_capacity(events.len());
        for e in events {
            let table = &self.det_seats;
            let e = assign_event_seat(e, |f, d| table.get(&f).and_then(|v| v.get(d).copied().flatten()));
            self.session.accumulate(&e)?;
            self.stats.events += 1;
            out.push(e);
        }
        Ok(out)
    }

    fn prune(&mut self) {
        match self.dedup.oldest_open_frame() {
            Some(oldest) => {
                let keep = self.det_seats.split_off(&oldest);
                self.det_seats = keep;
            }
            None => self.det_seats.clear(),
        }
    }

    /// Closes all open tracks and returns the finished session.
    pub fn finish(mut self) -> Result<ClassSession> {
        let rest = self.dedup.flush();
        self.settle(rest)?;
        Ok(self.session)
    }
}

/// Runs a whole stream through a fresh pipeline.
pub fn analyze(
    cfg: ClassroomConfig,
    course_id: impl Into<String>,
    frames: impl IntoIterator<Item = FrameRecord>,
) -> Result<ClassSession> {
    let mut p = Pipeline::new(cfg, course_id)?;
    for f in frames {
        p.push_frame(f)?;
    }
    p.finish()
}
