//! Scoring of analysis output against simulator ground truth.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use crate::dedup::iou_unchecked;
use crate::error::{Error, Result};
use crate::seatmap::SeatId;
use crate::simulator::{GroundTruth, ScriptedEvent};
use crate::tracker::{ClassSession, FrameObservation, SessionEvent, N_BEHAVIORS};

/// IoU needed for a predicted hand box to count as a real one.
pub const HAND_IOU_MIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MatchingReport {
    /// Hand-raising boxes in the stream.
    pub detected: u64,
    /// Boxes the matcher paired with a pose.
    pub matched: u64,
    /// Scripted hand-raising boxes.
    pub real: u64,
    /// Matched boxes overlapping a scripted box with the scripted seat.
    pub correct: u64,
}

impl MatchingReport {
    pub fn from_counts(detected: u64, matched: u64, real: u64, correct: u64) -> Self {
        Self { detected, matched, real, correct }
    }

    /// `correct / real`.
    pub fn precision(&self) -> Option<f64> {
        ratio(self.correct, self.real)
    }

    /// `matched / detected`.
    pub fn match_rate(&self) -> Option<f64> {
        ratio(self.matched, self.detected)
    }
}

fn ratio(a: u64, b: u64) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

fn index_frames<'a>(
    observations: &'a [FrameObservation],
    truth: &GroundTruth,
) -> Result<BTreeMap<u64, &'a FrameObservation>> {
    let obs: BTreeMap<u64, &FrameObservation> = observations.iter().map(|o| (o.frame, o)).collect();
    let truth_frames: BTreeSet<u64> = truth.frames.iter().map(|f| f.frame).collect();
    if obs.len() != observations.len() {
        return Err(Error::Coverage("duplicate frame in observations".into()));
    }
    let obs_frames: BTreeSet<u64> = obs.keys().copied().collect();
    if obs_frames != truth_frames {
        let missing = truth_frames.difference(&obs_frames).count();
        let extra = obs_frames.difference(&truth_frames).count();
        return Err(Error::Coverage(format!("{missing} truth frames unobserved, {extra} extra frames")));
    }
    Ok(obs)
}

/// Scores hand-raising matching frame by frame. Within a frame, predicted
/// and scripted boxes are paired one-to-one by descending IoU.
pub fn eval_matching(observations: &[FrameObservation], truth: &GroundTruth) -> Result<MatchingReport> {
    let obs = index_frames(observations, truth)?;
    let mut r = MatchingReport::default();
    for ft in &truth.frames {
        let o = obs[&ft.frame];
        r.detected += o.hands.len() as u64;
        r.matched += o.hands.iter().filter(|h| h.matched).count() as u64;
        r.real += ft.hands.len() as u64;

        let mut pairs = Vec::new();
        for (i, h) in o.hands.iter().enumerate() {
            for (j, t) in ft.hands.iter().enumerate() {
                let v = iou_unchecked(&h.bbox, &t.bbox);
                if v >= HAND_IOU_MIN {
                    pairs.push((v, i, j));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut used_p = alloc::vec![false; o.hands.len()];
        let mut used_t = alloc::vec![false; ft.hands.len()];
        for (_, i, j) in pairs {
            if used_p[i] || used_t[j] {
                continue;
            }
            used_p[i] = true;
            used_t[j] = true;
            let h = &o.hands[i];
            if h.matched && h.seat == Some(ft.hands[j].seat) {
                r.correct += 1;
            }
        }
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeatCounts {
    pub seat: SeatId,
    /// Frames in which the student was locatable.
    pub legal: u64,
    /// Legal frames with the student placed in the right seat.
    pub correct: u64,
}

impl SeatCounts {
    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.correct, self.legal)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeatReport {
    pub seats: Vec<SeatCounts>,
}

impl SeatReport {
    /// Builds a report from `(seat, legal, correct)` triples.
    pub fn from_counts(counts: &[(SeatId, u64, u64)]) -> Self {
        Self {
            seats: counts.iter().map(|&(seat, legal, correct)| SeatCounts { seat, legal, correct }).collect(),
        }
    }

    pub fn legal(&self) -> u64 {
        self.seats.iter().map(|s| s.legal).sum()
    }

    pub fn correct(&self) -> u64 {
        self.seats.iter().map(|s| s.correct).sum()
    }

    /// Pooled accuracy over all listed seats.
    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.correct(), self.legal())
    }

    /// Merges reports of several videos.
    pub fn pooled<'a>(reports: impl IntoIterator<Item = &'a SeatReport>) -> SeatReport {
        SeatReport { seats: reports.into_iter().flat_map(|r| r.seats.iter().copied()).collect() }
    }
}

/// Seat localisation accuracy per student. `seats` restricts the report to
/// the listed seats (every one must appear in the truth); `None` reports
/// every seat that appears.
pub fn eval_seats(
    observations: &[FrameObservation],
    truth: &GroundTruth,
    seats: Option<&[SeatId]>,
) -> Result<SeatReport> {
    let obs = index_frames(observations, truth)?;
    let mut counts: BTreeMap<SeatId, (u64, u64)> = BTreeMap::new();
    for ft in &truth.frames {
        let o = obs[&ft.frame];
        if o.pose_seats.len() != ft.pose_seats.len() {
            return Err(Error::Coverage(format!(
                "frame {}: {} poses observed, {} in truth",
                ft.frame,
                o.pose_seats.len(),
                ft.pose_seats.len()
            )));
        }
        for ((want, legal), got) in ft.pose_seats.iter().zip(&ft.legal).zip(&o.pose_seats) {
            let Some(want) = want else { continue };
            let c = counts.entry(*want).or_default();
            if *legal {
                c.0 += 1;
                if got == &Some(*want) {
                    c.1 += 1;
                }
            }
        }
    }
    let selected: Vec<SeatId> = match seats {
        Some(list) => {
            if let Some(s) = list.iter().find(|s| !counts.contains_key(s)) {
                return Err(Error::SeatWithoutTruth(*s));
            }
            list.to_vec()
        }
        None => counts.keys().copied().collect(),
    };
    Ok(SeatReport {
        seats: selected
            .into_iter()
            .map(|seat| {
                let (legal, correct) = counts[&seat];
                SeatCounts { seat, legal, correct }
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CountReport {
    /// Indexed like [`crate::ingest::BehaviorCategory::BEHAVIORS`].
    pub predicted: [usize; N_BEHAVIORS],
    pub scripted: [usize; N_BEHAVIORS],
    /// `(seat, predicted, scripted)` for every seat with either count
    /// non-zero.
    pub per_seat: Vec<(SeatId, [usize; N_BEHAVIORS], [usize; N_BEHAVIORS])>,
}

impl CountReport {
    pub fn abs_error(&self) -> [usize; N_BEHAVIORS] {
        core::array::from_fn(|i| self.predicted[i].abs_diff(self.scripted[i]))
    }
}

/// Compares per-category event counts with the script.
pub fn eval_counts(session: &ClassSession, truth: &GroundTruth) -> CountReport {
    let mut per: BTreeMap<SeatId, ([usize; N_BEHAVIORS], [usize; N_BEHAVIORS])> = BTreeMap::new();
    for t in session.tracklets() {
        let c = t.counts();
        if c.iter().any(|&n| n > 0) {
            per.entry(t.seat).or_default().0 = c;
        }
    }
    for e in &truth.events {
        if let Some(i) = e.category.behavior_index() {
            per.entry(e.seat).or_default().1[i] += 1;
        }
    }
    CountReport {
        predicted: session.totals(),
        scripted: truth.event_counts(),
        per_seat: per.into_iter().map(|(s, (p, t))| (s, p, t)).collect(),
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventReport {
    pub recovered: usize,
    pub missed: Vec<ScriptedEvent>,
    pub spurious: Vec<SessionEvent>,
}

impl EventReport {
    pub fn is_exact(&self) -> bool {
        self.missed.is_empty() && self.spurious.is_empty()
    }
}

/// Sampled frame span `[first, last]` covered by a scripted event.
pub fn scripted_frames(e: &ScriptedEvent, interval: f64) -> (u64, u64) {
    let first = libm::ceil(e.start_t / interval - 1e-9);
    let end = libm::ceil((e.start_t + e.duration_s) / interval - 1e-9);
    (first.max(0.0) as u64, (end.max(1.0) as u64 - 1).max(first as u64))
}

/// Event-level comparison: a scripted event is recovered by a predicted
/// event with the same seat, category and frame span.
pub fn eval_events(session: &ClassSession, truth: &GroundTruth) -> EventReport {
    let interval = session.config.sample_interval_s;
    let mut pool: Vec<Option<SessionEvent>> = session.events().into_iter().map(Some).collect();
    let mut report = EventReport::default();
    for e in &truth.events {
        let (first, last) = scripted_frames(e, interval);
        let hit = pool.iter().position(|p| {
            p.as_ref().is_some_and(|p| {
                p.seat == Some(e.seat) && p.category == e.category && p.start_frame == first && p.end_frame == last
            })
        });
        match hit {
            Some(i) => {
                pool[i] = None;
                report.recovered += 1;
            }
            None => report.missed.push(e.clone()),
        }
    }
    report.spurious = pool.into_iter().flatten().collect();
    report
}
