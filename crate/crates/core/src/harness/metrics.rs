//! Outcome classification and reaction time from per-step records.

use serde::{Deserialize, Serialize};

use super::Outcome;
use crate::planner::stopping_distance;

/// Ego-collider footprint distance below which a run counts as a near miss (m).
pub const NEAR_MISS_DISTANCE: f64 = 2.0;
/// Both vehicles stalled this long (ms) counts as a deadlock.
pub const DEADLOCK_WINDOW_MS: u64 = 10_000;
/// Speed under which a vehicle counts as stalled (m/s).
pub const STALL_SPEED: f64 = 0.1;

/// Physics-step sample of the quantities the metrics need.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t_ms: u64,
    pub ego_speed: f64,
    /// Arc length from the ego's front to the conflict zone; negative once inside.
    pub ego_to_conflict: f64,
    pub collider_speed: Option<f64>,
    /// Footprint distance between ego and collider.
    pub collider_gap: Option<f64>,
    /// The collider has cleared the conflict point.
    pub collider_clear: bool,
    /// The ego footprint overlaps some other vehicle.
    pub ego_overlap: bool,
}

/// Crash beats deadlock, which beats near miss.
pub fn classify_outcome(records: &[StepRecord]) -> Outcome {
    if records.iter().any(|r| r.ego_overlap || r.collider_gap == Some(0.0)) {
        return Outcome::Crash;
    }
    let mut stalled_since: Option<u64> = None;
    for r in records {
        let stalled = r.ego_speed < STALL_SPEED && r.collider_speed.is_none_or(|v| v < STALL_SPEED);
        if !stalled {
            stalled_since = None;
            continue;
        }
        let since = *stalled_since.get_or_insert(r.t_ms);
        if r.t_ms - since >= DEADLOCK_WINDOW_MS {
            return Outcome::Deadlock;
        }
    }
    let closest = records.iter().filter_map(|r| r.collider_gap).fold(f64::INFINITY, f64::min);
    if closest < NEAR_MISS_DISTANCE {
        Outcome::NearMiss
    } else {
        Outcome::SafePassage
    }
}

/// `max(0, t_last - t_aware)` in seconds, where `t_last` is the last instant,
/// before the collider clears the conflict, at which the ego could still stop
/// short of the conflict zone. Never aware means no reaction time.
pub fn compute_reaction_time(records: &[StepRecord], aware_ms: Option<u64>, decel: f64) -> f64 {
    let Some(aware) = aware_ms else { return 0.0 };
    let t_last = records
        .iter()
        .take_while(|r| !r.collider_clear)
        .filter(|r| r.ego_to_conflict >= stopping_distance(r.ego_speed, decel))
        .map(|r| r.t_ms)
        .last();
    match t_last {
        Some(t) if t > aware => (t - aware) as f64 / 1000.0,
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t_ms: u64, ego_speed: f64, to_conflict: f64, gap: f64) -> StepRecord {
        StepRecord {
            t_ms,
            ego_speed,
            ego_to_conflict: to_conflict,
            collider_speed: Some(8.0),
            collider_gap: Some(gap),
            collider_clear: false,
            ego_overlap: false,
        }
    }

    #[test]
    fn outcome_priority() {
        let mut rs: Vec<StepRecord> = (0..10).map(|i| rec(i * 100, 5.0, 10.0, 5.0)).collect();
        assert_eq!(classify_outcome(&rs), Outcome::SafePassage);
        rs[3].collider_gap = Some(1.5);
        assert_eq!(classify_outcome(&rs), Outcome::NearMiss);
        rs[4].collider_gap = Some(0.0);
        assert_eq!(classify_outcome(&rs), Outcome::Crash);
    }

    #[test]
    fn deadlock_needs_both_stalled_for_the_window() {
        let mut rs: Vec<StepRecord> = (0..=100)
            .map(|i| StepRecord { collider_speed: Some(0.0), ..rec(i * 100, 0.0, 3.0, 1.0) })
            .collect();
        assert_eq!(classify_outcome(&rs), Outcome::Deadlock);
        rs[50].collider_speed = Some(1.0);
        assert_eq!(classify_outcome(&rs), Outcome::NearMiss);
    }

    #[test]
    fn reaction_time() {
        // Stopping distance at 6 m/s with 6 m/s^2 is 3 m.
        let rs: Vec<StepRecord> = (0..50).map(|i| rec(i * 100, 6.0, 0.5 * (50 - i) as f64, 5.0)).collect();
        // Last sample with distance >= 3 m is i = 44.
        assert!((compute_reaction_time(&rs, Some(1000), 6.0) - 3.4).abs() < 1e-9);
        assert_eq!(compute_reaction_time(&rs, Some(4800), 6.0), 0.0);
        assert_eq!(compute_reaction_time(&rs, None, 6.0), 0.0);
    }
}
