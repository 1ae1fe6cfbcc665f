//! Evaluation reports as text tables and JSON.

use std::fmt::Write;

use serde::Serialize;

use seatrack_core::evaluator::{CountReport, MatchingReport, SeatReport};
use seatrack_core::BehaviorCategory;

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{:.2}%", v * 100.0))
}

pub fn matching_table(r: &MatchingReport) -> String {
    let mut s = String::new();
    writeln!(s, "hand-raising matching").unwrap();
    writeln!(s, "  detected    {:>8}", r.detected).unwrap();
    writeln!(s, "  matched     {:>8}", r.matched).unwrap();
    writeln!(s, "  real        {:>8}", r.real).unwrap();
    writeln!(s, "  correct     {:>8}", r.correct).unwrap();
    writeln!(s, "  precision   {:>8}  ({}/{})", pct(r.precision()), r.correct, r.real).unwrap();
    writeln!(s, "  match rate  {:>8}  ({}/{})", pct(r.match_rate()), r.matched, r.detected).unwrap();
    s
}

/// Per-seat rows, a totals row and the pooled accuracy.
pub fn seat_table(r: &SeatReport) -> String {
    let mut s = String::new();
    writeln!(s, "{:<8} {:>8} {:>8} {:>8}", "seat", "F_l", "F_c", "Acc_s").unwrap();
    for c in &r.seats {
        let acc = c.accuracy().map_or_else(|| "-".to_string(), |a| format!("{:.2}", a));
        writeln!(s, "{:<8} {:>8} {:>8} {:>8}", c.seat.to_string(), c.legal, c.correct, acc).unwrap();
    }
    writeln!(s, "{:<8} {:>8} {:>8}", "total", r.legal(), r.correct()).unwrap();
    writeln!(s, "Acc_a {}", pct(r.accuracy())).unwrap();
    s
}

pub fn count_table(r: &CountReport) -> String {
    let mut s = String::new();
    writeln!(s, "{:<14} {:>9} {:>9} {:>6}", "category", "predicted", "scripted", "error").unwrap();
    let err = r.abs_error();
    for (i, cat) in BehaviorCategory::BEHAVIORS.iter().enumerate() {
        writeln!(s, "{:<14} {:>9} {:>9} {:>6}", cat.name(), r.predicted[i], r.scripted[i], err[i]).unwrap();
    }
    s
}

/// Machine-readable evaluation result.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationDocument {
    pub matching: MatchingReport,
    pub precision: Option<f64>,
    pub match_rate: Option<f64>,
    pub seats: SeatReport,
    pub acc_a: Option<f64>,
    pub counts: CountReport,
    pub count_error: [usize; 5],
}

impl EvaluationDocument {
    pub fn new(matching: MatchingReport, seats: SeatReport, counts: CountReport) -> Self {
        Self {
            precision: matching.precision(),
            match_rate: matching.match_rate(),
            acc_a: seats.accuracy(),
            count_error: counts.abs_error(),
            matching,
            seats,
            counts,
        }
    }
}
