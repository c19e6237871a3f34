use super::{FramePlan, SchedulerInput};
use crate::geometry::VehicleId;

/// Round-robin position carried from one interval to the next.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AgnosticState {
    /// Vehicle to serve first in the next interval.
    pub cursor: Option<VehicleId>,
}

/// Relevance-blind round robin: vehicles in ascending id take turns sending
/// one object each, in their extraction order, packed into frames in order.
/// Stops at the first object that fits no remaining frame; that vehicle is
/// served first next time.
pub fn agnostic_schedule(input: &SchedulerInput, state: &mut AgnosticState) -> FramePlan {
    let mut plan = FramePlan::empty(&input.frame_budgets);
    let max_budget = input.frame_budgets.iter().copied().max().unwrap_or(0);
    let mut senders: Vec<VehicleId> = input.items.iter().map(|i| i.tx).collect();
    senders.sort();
    senders.dedup();
    if senders.is_empty() {
        return plan;
    }
    let queues: Vec<Vec<usize>> = senders
        .iter()
        .map(|s| (0..input.items.len()).filter(|&i| input.items[i].tx == *s && input.items[i].size <= max_budget).collect())
        .collect();
    let start = state.cursor.map_or(0, |c| senders.iter().position(|s| *s >= c).unwrap_or(0));
    let mut next = vec![0usize; senders.len()];
    let mut frame = 0;
    let mut remaining: usize = queues.iter().map(|q| q.len()).sum();
    let mut turn = start;
    while remaining > 0 {
        let v = turn % senders.len();
        if let Some(&i) = queues[v].get(next[v]) {
            let size = input.items[i].size;
            while frame < plan.budgets.len() && !plan.fits(frame, size) {
                frame += 1;
            }
            if frame == plan.budgets.len() {
                state.cursor = Some(senders[v]);
                return plan;
            }
            plan.push(frame, i, &input.items[i]);
            next[v] += 1;
            remaining -= 1;
        }
        turn += 1;
    }
    state.cursor = Some(senders[turn % senders.len()]);
    plan
}
