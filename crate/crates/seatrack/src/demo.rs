//! Built-in demo classroom used by the service examples and tests.

use seatrack_core::simulator::{random_script, CameraModel, ScenarioSpec, ScriptOptions, ScriptedEvent};
use seatrack_core::{BehaviorCategory, Point, SeatId};

pub const DEMO_SEED: u64 = 2019;

/// A 5 x 9 room over ten minutes: a hand raised at R2C7, a smile at R4C9,
/// and a random mix of behaviors elsewhere. R5C1 is empty.
pub fn demo_spec() -> ScenarioSpec {
    let mut s = ScenarioSpec::new(5, 9, 600.0, CameraModel::left_view());
    s.teacher_at = Some(Point::new(1780.0, 420.0));
    s.vacant_seats = vec![SeatId::new(5, 1)];
    s.seed = DEMO_SEED;
    let featured = [SeatId::new(2, 7), SeatId::new(4, 9)];
    s.events = random_script(&s, &ScriptOptions { events: 70, ..Default::default() }, DEMO_SEED)
        .into_iter()
        .filter(|e| !featured.contains(&e.seat))
        .collect();
    s.events.push(ScriptedEvent {
        seat: featured[0],
        category: BehaviorCategory::HandRaising,
        start_t: 30.0,
        duration_s: 9.0,
    });
    s.events.push(ScriptedEvent {
        seat: featured[1],
        category: BehaviorCategory::Smiling,
        start_t: 60.0,
        duration_s: 6.0,
    });
    s
}
