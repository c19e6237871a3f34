use super::{fill_zero_priority, priorities, tie_key, FramePlan, SchedulerInput};

/// Max-weight greedy: frames are filled in order with the highest-priority
/// unscheduled item that still fits, skipping items that do not.
///
/// Scheduled items are treated as delivered for later frames, so an item's
/// weight only drops once it is in the plan and the ranking computed up front
/// stays valid frame to frame.
pub fn greedy_schedule(input: &SchedulerInput) -> FramePlan {
    let prio = priorities(input);
    let mut order: Vec<usize> = (0..input.items.len()).filter(|&i| prio[i] > 0.0).collect();
    order.sort_by(|&a, &b| {
        prio[b]
            .total_cmp(&prio[a])
            .then_with(|| tie_key(&input.items[a]).cmp(&tie_key(&input.items[b])))
    });
    let mut plan = FramePlan::empty(&input.frame_budgets);
    let mut taken = vec![false; input.items.len()];
    for f in 0..input.frame_budgets.len() {
        for &i in &order {
            if !taken[i] && plan.fits(f, input.items[i].size) {
                taken[i] = true;
                plan.push(f, i, &input.items[i]);
            }
        }
    }
    fill_zero_priority(input, &prio, &mut plan);
    plan
}
