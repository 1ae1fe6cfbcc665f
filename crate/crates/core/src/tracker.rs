//! Seat-indexed tracklets and the aggregates built on them.
//!
//! A classroom of `R x C` seats yields `R x C x 5` tracklets, one per seat
//! and tracked behavior. Seat identity is the only student identity kept.

use alloc::string::String;
use alloc::vec::Vec;

use crate::dedup::BehaviorEvent;
use crate::error::{Error, Result};
use crate::ingest::{BBox, BehaviorCategory, ClassroomConfig};
use crate::seatmap::SeatId;

/// Number of tracked behaviors.
pub const N_BEHAVIORS: usize = 5;

/// Persisted summary of one deduplicated event.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SessionEvent {
    pub category: BehaviorCategory,
    pub seat: Option<SeatId>,
    pub start_frame: u64,
    pub end_frame: u64,
    pub start_t: f64,
    pub end_t: f64,
}

impl From<&BehaviorEvent> for SessionEvent {
    fn from(e: &BehaviorEvent) -> Self {
        Self {
            category: e.category,
            seat: e.seat,
            start_frame: e.start_frame,
            end_frame: e.end_frame,
            start_t: e.start_t,
            end_t: e.end_t,
        }
    }
}

impl SessionEvent {
    fn sort_key(&self) -> (f64, u64, u64, &'static str) {
        (self.start_t, self.start_frame, self.end_frame, self.category.name())
    }

    fn cmp_key(&self, other: &Self) -> core::cmp::Ordering {
        let (a, b) = (self.sort_key(), other.sort_key());
        a.0.total_cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(b.3))
            .then(self.seat.cmp(&other.seat))
            .then(self.end_t.total_cmp(&other.end_t))
    }
}

/// Per-seat record of the five behaviors.
#[derive(Debug, Clone, PartialEq)]
pub struct SeatTracklet {
    pub seat: SeatId,
    pub occupied: bool,
    /// Indexed like [`BehaviorCategory::BEHAVIORS`]; each list time-sorted.
    pub events: [Vec<SessionEvent>; N_BEHAVIORS],
}

impl SeatTracklet {
    fn new(seat: SeatId) -> Self {
        Self { seat, occupied: false, events: Default::default() }
    }

    pub fn counts(&self) -> [usize; N_BEHAVIORS] {
        core::array::from_fn(|i| self.events[i].len())
    }

    /// Positive and negative event counts with `start_t <= up_to_t`.
    pub fn polarity_counts(&self, up_to_t: f64) -> (usize, usize) {
        let (mut pos, mut neg) = (0, 0);
        for (i, cat) in BehaviorCategory::BEHAVIORS.iter().enumerate() {
            let n = self.events[i].partition_point(|e| e.start_t <= up_to_t);
            if cat.is_positive() {
                pos += n;
            } else if cat.is_negative() {
                neg += n;
            }
        }
        (pos, neg)
    }
}

/// Laplace-smoothed share of positive events, `(P + 1) / (P + N + 2)`.
/// `None` for a seat nobody occupied.
pub fn engagement_score(tracklet: &SeatTracklet, up_to_t: f64) -> Option<f64> {
    if !tracklet.occupied {
        return None;
    }
    let (p, n) = tracklet.polarity_counts(up_to_t);
    Some((p as f64 + 1.0) / ((p + n) as f64 + 2.0))
}

/// Per-frame diagnostic record kept for evaluation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrameObservation {
    pub frame: u64,
    pub t: f64,
    /// Seat of each pose, aligned with the pose list of the input record
    /// (dropped and teacher poses are `None`).
    pub pose_seats: Vec<Option<SeatId>>,
    pub hands: Vec<HandObservation>,
}

/// A hand-raising box and the seat of the pose it was matched to.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HandObservation {
    pub bbox: BBox,
    pub matched: bool,
    pub seat: Option<SeatId>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SessionMeta {
    pub course_id: String,
    pub duration_s: f64,
    /// Snapshot counter, bumped on every live publication.
    pub version: u64,
}

/// Full observation result of one course.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSession {
    pub config: ClassroomConfig,
    pub meta: SessionMeta,
    /// Row-major `rows x cols`.
    tracklets: Vec<SeatTracklet>,
    unassigned: Vec<SessionEvent>,
    timeline: Vec<[u32; N_BEHAVIORS]>,
    pub observations: Vec<FrameObservation>,
}

impl ClassSession {
    pub fn new(config: ClassroomConfig, course_id: impl Into<String>) -> Result<Self> {
        config.validate()?;
        let tracklets = (1..=config.rows)
            .flat_map(|r| (1..=config.cols).map(move |c| SeatTracklet::new(SeatId::new(r, c))))
            .collect();
        Ok(Self {
            config,
            meta: SessionMeta { course_id: course_id.into(), duration_s: 0.0, version: 0 },
            tracklets,
            unassigned: Vec::new(),
            timeline: Vec::new(),
            observations: Vec::new(),
        })
    }

    /// Rebuilds a session from its persisted parts.
    pub fn from_parts(
        config: ClassroomConfig,
        meta: SessionMeta,
        occupied: &[SeatId],
        events: &[SessionEvent],
        observations: Vec<FrameObservation>,
    ) -> Result<Self> {
        let mut s = Self::new(config, meta.course_id.clone())?;
        s.set_duration(meta.duration_s);
        s.meta = meta;
        for seat in occupied {
            s.mark_occupied(*seat)?;
        }
        for e in events {
            s.accumulate_record(e.clone())?;
        }
        s.observations = observations;
        Ok(s)
    }

    pub fn rows(&self) -> u32 {
        self.config.rows
    }

    pub fn cols(&self) -> u32 {
        self.config.cols
    }

    pub fn duration(&self) -> f64 {
        self.meta.duration_s
    }

    pub fn tracklets(&self) -> &[SeatTracklet] {
        &self.tracklets
    }

    pub fn unassigned(&self) -> &[SessionEvent] {
        &self.unassigned
    }

    fn check_seat(&self, seat: SeatId) -> Result<usize> {
        if seat.in_grid(self.rows(), self.cols()) {
            Ok(seat.grid_index(self.cols()))
        } else {
            Err(Error::SeatOutOfGrid(seat, self.rows(), self.cols()))
        }
    }

    pub fn tracklet(&self, seat: SeatId) -> Result<&SeatTracklet> {
        let i = self.check_seat(seat)?;
        Ok(&self.tracklets[i])
    }

    pub fn mark_occupied(&mut self, seat: SeatId) -> Result<()> {
        let i = self.check_seat(seat)?;
        self.tracklets[i].occupied = true;
        Ok(())
    }

    pub fn occupied_seats(&self) -> Vec<SeatId> {
        self.tracklets.iter().filter(|t| t.occupied).map(|t| t.seat).collect()
    }

    /// Sample slot of time `t`, `floor(t / interval)`.
    pub fn sample_index(&self, t: f64) -> usize {
        let v = libm::floor(t / self.config.sample_interval_s + 1e-9);
        if v > 0.0 { v as usize } else { 0 }
    }

    /// Extends the session to at least `duration_s`; the timeline always
    /// holds `ceil(duration / interval)` samples.
    pub fn set_duration(&mut self, duration_s: f64) {
        if duration_s > self.meta.duration_s {
            self.meta.duration_s = duration_s;
        }
        let n = libm::ceil(self.meta.duration_s / self.config.sample_interval_s - 1e-9);
        let n = if n > 0.0 { n as usize } else { 0 };
        if self.timeline.len() < n {
            self.timeline.resize(n, [0; N_BEHAVIORS]);
        }
    }

    /// Adds one finalized event to its seat's tracklet, or to the unassigned
    /// bucket when it has no seat.
    pub fn accumulate(&mut self, event: &BehaviorEvent) -> Result<()> {
        self.accumulate_record(SessionEvent::from(event))
    }

    pub fn accumulate_record(&mut self, event: SessionEvent) -> Result<()> {
        let Some(ci) = event.category.behavior_index() else {
            return Err(Error::WrongCategory(event.category));
        };
        let slot = self.sample_index(event.start_t);
        let list = match event.seat {
            Some(seat) => {
                let i = self.check_seat(seat)?;
                &mut self.tracklets[i].events[ci]
            }
            None => &mut self.unassigned,
        };
        let pos = list.partition_point(|e| e.cmp_key(&event).is_le());
        list.insert(pos, event);
        if slot >= self.timeline.len() {
            let d = (slot + 1) as f64 * self.config.sample_interval_s;
            self.set_duration(d);
        }
        self.timeline[slot][ci] += 1;
        Ok(())
    }

    /// Every event: tracklets in grid order (category-major within a seat),
    /// then the unassigned bucket.
    pub fn events(&self) -> Vec<SessionEvent> {
        self.tracklets
            .iter()
            .flat_map(|t| t.events.iter().flatten())
            .chain(&self.unassigned)
            .cloned()
            .collect()
    }

    /// Per-category totals over the grid and the unassigned bucket.
    pub fn totals(&self) -> [usize; N_BEHAVIORS] {
        let mut out = [0; N_BEHAVIORS];
        for t in &self.tracklets {
            for (o, c) in out.iter_mut().zip(t.counts()) {
                *o += c;
            }
        }
        for e in &self.unassigned {
            out[e.category.behavior_index().expect("tracked category")] += 1;
        }
        out
    }

    pub fn unassigned_counts(&self) -> [usize; N_BEHAVIORS] {
        let mut out = [0; N_BEHAVIORS];
        for e in &self.unassigned {
            out[e.category.behavior_index().expect("tracked category")] += 1;
        }
        out
    }

    /// Row-major engagement scores at time `t`.
    pub fn heatmap(&self, t: f64) -> Result<Vec<Option<f64>>> {
        if !(t >= 0.0 && t <= self.duration()) {
            return Err(Error::TimeOutOfRange { t, duration: self.duration() });
        }
        Ok(self.tracklets.iter().map(|tr| engagement_score(tr, t)).collect())
    }

    /// All events of one seat ordered by start time, ties by category name.
    pub fn sequence(&self, seat: SeatId) -> Result<Vec<(f64, BehaviorCategory)>> {
        let tr = self.tracklet(seat)?;
        let mut out: Vec<(f64, BehaviorCategory)> = tr
            .events
            .iter()
            .flatten()
            .map(|e| (e.start_t, e.category))
            .collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.name().cmp(b.1.name())));
        Ok(out)
    }

    /// Per-sample counts of events starting in that sample.
    pub fn flow(&self) -> &[[u32; N_BEHAVIORS]] {
        &self.timeline
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Point;
    use alloc::vec;
    use proptest::prelude::*;

    fn cfg(rows: u32, cols: u32) -> ClassroomConfig {
        ClassroomConfig::new(
            1920.0,
            1080.0,
            rows,
            cols,
            [
                Point::new(500.0, 250.0),
                Point::new(1400.0, 250.0),
                Point::new(1800.0, 1000.0),
                Point::new(100.0, 1000.0),
            ],
        )
    }

    fn ev(cat: BehaviorCategory, seat: Option<SeatId>, t: f64) -> SessionEvent {
        let f = (t / 3.0) as u64;
        SessionEvent { category: cat, seat, start_frame: f, end_frame: f + 1, start_t: t, end_t: t + 3.0 }
    }

    fn session() -> ClassSession {
        let mut s = ClassSession::new(cfg(5, 9), "demo").unwrap();
        s.set_duration(120.0);
        s
    }

    #[test]
    fn hand_raising_lands_in_its_seat() {
        let mut s = session();
        let seat = SeatId::new(2, 7);
        s.accumulate_record(ev(BehaviorCategory::HandRaising, Some(seat), 12.0)).unwrap();
        assert_eq!(s.tracklet(seat).unwrap().counts(), [1, 0, 0, 0, 0]);
        assert_eq!(s.totals(), [1, 0, 0, 0, 0]);
    }

    #[test]
    fn seatless_event_goes_to_unassigned() {
        let mut s = session();
        s.accumulate_record(ev(BehaviorCategory::Yawning, None, 6.0)).unwrap();
        assert_eq!(s.unassigned().len(), 1);
        assert!(s.tracklets().iter().all(|t| t.counts() == [0; 5]));
    }

    #[test]
    fn lists_stay_time_sorted() {
        let mut s = session();
        let seat = SeatId::new(1, 1);
        s.accumulate_record(ev(BehaviorCategory::Sleeping, Some(seat), 60.0)).unwrap();
        s.accumulate_record(ev(BehaviorCategory::Sleeping, Some(seat), 30.0)).unwrap();
        let list = &s.tracklet(seat).unwrap().events[2];
        assert_eq!(list.len(), 2);
        assert!(list[0].start_t < list[1].start_t);
    }

    #[test]
    fn rejects_out_of_grid_and_teacher() {
        let mut s = session();
        assert!(matches!(
            s.accumulate_record(ev(BehaviorCategory::Standing, Some(SeatId::new(6, 1)), 0.0)),
            Err(Error::SeatOutOfGrid(..))
        ));
        assert_eq!(
            s.accumulate_record(ev(BehaviorCategory::Teacher, None, 0.0)),
            Err(Error::WrongCategory(BehaviorCategory::Teacher))
        );
        assert!(s.sequence(SeatId::new(1, 10)).is_err());
    }

    #[test]
    fn engagement_examples() {
        let mut tr = SeatTracklet::new(SeatId::new(1, 1));
        assert_eq!(engagement_score(&tr, 0.0), None);
        tr.occupied = true;
        assert_eq!(engagement_score(&tr, 0.0), Some(0.5));
        for t in [1.0, 2.0, 3.0] {
            tr.events[0].push(ev(BehaviorCategory::HandRaising, None, t));
        }
        assert_eq!(engagement_score(&tr, 10.0), Some(4.0 / 5.0));
        assert_eq!(engagement_score(&tr, 1.5), Some(2.0 / 3.0));
        let mut tr = SeatTracklet::new(SeatId::new(1, 1));
        tr.occupied = true;
        tr.events[2].push(ev(BehaviorCategory::Sleeping, None, 1.0));
        tr.events[3].push(ev(BehaviorCategory::Yawning, None, 2.0));
        assert_eq!(engagement_score(&tr, 10.0), Some(0.25));
    }

    #[test]
    fn heatmap_examples() {
        let mut s = session();
        let (a, b, c) = (SeatId::new(1, 1), SeatId::new(1, 2), SeatId::new(3, 3));
        s.mark_occupied(a).unwrap();
        s.mark_occupied(b).unwrap();
        s.accumulate_record(ev(BehaviorCategory::Smiling, Some(a), 9.0)).unwrap();
        let h0 = s.heatmap(0.0).unwrap();
        assert_eq!(h0[a.grid_index(9)], Some(0.5));
        assert_eq!(h0[b.grid_index(9)], Some(0.5));
        let h = s.heatmap(30.0).unwrap();
        assert_eq!(h[a.grid_index(9)], Some(2.0 / 3.0));
        assert_eq!(h[b.grid_index(9)], Some(0.5));
        assert_eq!(h[c.grid_index(9)], None);
        assert!(s.heatmap(-1.0).is_err());
        assert!(s.heatmap(121.0).is_err());
    }

    #[test]
    fn sequence_examples() {
        let mut s = session();
        let seat = SeatId::new(4, 9);
        assert!(s.sequence(seat).unwrap().is_empty());
        s.accumulate_record(ev(BehaviorCategory::Standing, Some(seat), 30.0)).unwrap();
        s.accumulate_record(ev(BehaviorCategory::Smiling, Some(seat), 10.0)).unwrap();
        s.accumulate_record(ev(BehaviorCategory::HandRaising, Some(seat), 30.0)).unwrap();
        assert_eq!(
            s.sequence(seat).unwrap(),
            vec![
                (10.0, BehaviorCategory::Smiling),
                (30.0, BehaviorCategory::HandRaising),
                (30.0, BehaviorCategory::Standing),
            ]
        );
    }

    #[test]
    fn flow_examples() {
        let mut s = session();
        assert_eq!(s.flow().len(), 40);
        assert!(s.flow().iter().all(|v| *v == [0; 5]));
        s.accumulate_record(ev(BehaviorCategory::Standing, Some(SeatId::new(1, 1)), 9.0)).unwrap();
        assert_eq!(s.flow()[3], [0, 1, 0, 0, 0]);
        s.accumulate_record(ev(BehaviorCategory::Standing, None, 200.0)).unwrap();
        assert_eq!(s.flow().len(), 67);
        assert_eq!(s.duration(), 201.0);
    }

    fn arb_events() -> impl Strategy<Value = Vec<SessionEvent>> {
        let e = (0..5usize, proptest::option::of((1..=5u32, 1..=9u32)), 0..40u32).prop_map(|(c, seat, k)| {
            ev(BehaviorCategory::BEHAVIORS[c], seat.map(|(r, c)| SeatId::new(r, c)), k as f64 * 3.0)
        });
        proptest::collection::vec(e, 0..60)
    }

    proptest! {
        #[test]
        fn conservation_and_order_independence(events in arb_events(), seed in any::<u64>()) {
            let mut a = session();
            let mut totals = [0usize; 5];
            for e in &events {
                a.accumulate_record(e.clone()).unwrap();
                totals[e.category.behavior_index().unwrap()] += 1;
                let grid: usize = a.tracklets().iter().map(|t| t.counts().iter().sum::<usize>()).sum();
                let un: usize = a.unassigned_counts().iter().sum();
                prop_assert_eq!(grid + un, a.totals().iter().sum::<usize>());
            }
            prop_assert_eq!(a.totals(), totals);
            let mut flow = [0usize; 5];
            for v in a.flow() {
                for i in 0..5 {
                    flow[i] += v[i] as usize;
                }
            }
            prop_assert_eq!(flow, totals);

            let mut shuffled = events.clone();
            let n = shuffled.len();
            if n > 1 {
                let mut x = seed;
                for i in (1..n).rev() {
                    x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    shuffled.swap(i, (x >> 33) as usize % (i + 1));
                }
            }
            let mut b = session();
            for e in shuffled {
                b.accumulate_record(e).unwrap();
            }
            prop_assert_eq!(a, b);
        }

        #[test]
        fn engagement_moves_with_polarity(p in 0usize..20, n in 0usize..20) {
            let mut tr = SeatTracklet::new(SeatId::new(1, 1));
            tr.occupied = true;
            for _ in 0..p { tr.events[0].push(ev(BehaviorCategory::HandRaising, None, 0.0)); }
            for _ in 0..n { tr.events[2].push(ev(BehaviorCategory::Sleeping, None, 0.0)); }
            let base = engagement_score(&tr, 1.0).unwrap();
            prop_assert!(base > 0.0 && base < 1.0);
            let mut up = tr.clone();
            up.events[4].push(ev(BehaviorCategory::Smiling, None, 0.0));
            prop_assert!(engagement_score(&up, 1.0).unwrap() > base);
            let mut down = tr.clone();
            down.events[3].push(ev(BehaviorCategory::Yawning, None, 0.0));
            prop_assert!(engagement_score(&down, 1.0).unwrap() < base);
        }
    }
}
