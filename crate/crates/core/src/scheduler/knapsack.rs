use super::{fill_zero_priority, priorities, tie_key, FramePlan, SchedulerInput};

/// Default size quantum (bytes) of the exact DP table.
pub const DEFAULT_RESOLUTION: u64 = 64;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Selection {
    /// Chosen indices, ascending.
    pub items: Vec<usize>,
    pub value: f64,
    pub bytes: u64,
}

impl Selection {
    fn from_indices(mut items: Vec<usize>, values: &[(f64, u64)]) -> Self {
        items.sort_unstable();
        let value = items.iter().map(|&i| values[i].0).sum();
        let bytes = items.iter().map(|&i| values[i].1).sum();
        Self { items, value, bytes }
    }
}

/// 0/1 knapsack over `(value, size)` pairs. Sizes are rounded up and the budget
/// down to multiples of `resolution`, so the result is optimal at that
/// granularity and always feasible in exact bytes.
pub fn knapsack_exact(items: &[(f64, u64)], budget: u64, resolution: u64) -> Selection {
    let res = resolution.max(1);
    let cap = (budget / res) as usize;
    let cand: Vec<usize> = (0..items.len()).filter(|&i| items[i].0 > 0.0 && items[i].1 <= budget).collect();
    if cap == 0 || cand.is_empty() {
        return Selection::default();
    }
    let w: Vec<usize> = cand.iter().map(|&i| items[i].1.div_ceil(res) as usize).collect();
    let width = cap + 1;
    let mut best = vec![0.0f64; width];
    let mut keep = vec![false; cand.len() * width];
    for (k, &i) in cand.iter().enumerate() {
        let (v, wk) = (items[i].0, w[k]);
        if wk > cap {
            continue;
        }
        for c in (wk..=cap).rev() {
            let with = best[c - wk] + v;
            if with > best[c] {
                best[c] = with;
                keep[k * width + c] = true;
            }
        }
    }
    let mut c = cap;
    let mut chosen = Vec::new();
    for k in (0..cand.len()).rev() {
        if keep[k * width + c] {
            chosen.push(cand[k]);
            c -= w[k];
        }
    }
    Selection::from_indices(chosen, items)
}

/// Profit-scaling approximation: value is at least `(1 - eps)` of the optimum,
/// in time polynomial in the item count and `1 / eps`.
pub fn fptas_schedule(items: &[(f64, u64)], budget: u64, eps: f64) -> Selection {
    let eps = eps.clamp(1e-6, 1.0 - 1e-9);
    let cand: Vec<usize> = (0..items.len()).filter(|&i| items[i].0 > 0.0 && items[i].1 <= budget).collect();
    if cand.is_empty() {
        return Selection::default();
    }
    // Density greedy or best single item is within a factor 2 of the optimum.
    let mut by_density = cand.clone();
    by_density.sort_by(|&a, &b| (items[b].0 / items[b].1 as f64).total_cmp(&(items[a].0 / items[a].1 as f64)));
    let (mut used, mut greedy_value) = (0u64, 0.0);
    for &i in &by_density {
        if used + items[i].1 <= budget {
            used += items[i].1;
            greedy_value += items[i].0;
        }
    }
    let best_single = cand.iter().map(|&i| items[i].0).fold(0.0, f64::max);
    let lower = greedy_value.max(best_single);
    let n = cand.len();
    let scale = eps * lower / n as f64;
    let profit: Vec<usize> = cand.iter().map(|&i| (items[i].0 / scale).floor() as usize).collect();
    let total: usize = profit.iter().sum();
    let limit = total.min((2.0 * lower / scale).ceil() as usize + n);
    let width = limit + 1;
    // min_size[q] = least bytes reaching scaled profit exactly q
    let mut min_size = vec![u64::MAX; width];
    min_size[0] = 0;
    let mut keep = vec![false; n * width];
    let mut reach = 0usize;
    for k in 0..n {
        let (pk, sk) = (profit[k], items[cand[k]].1);
        if pk == 0 {
            continue;
        }
        let top = (reach + pk).min(limit);
        for q in (pk..=top).rev() {
            let prev = min_size[q - pk];
            if prev != u64::MAX && prev + sk <= budget && prev + sk < min_size[q] {
                min_size[q] = prev + sk;
                keep[k * width + q] = true;
            }
        }
        reach = top;
    }
    let mut q = (0..width).rev().find(|&q| min_size[q] <= budget).unwrap_or(0);
    let mut chosen = Vec::new();
    for k in (0..n).rev() {
        if q > 0 && keep[k * width + q] {
            chosen.push(cand[k]);
            q -= profit[k];
        }
    }
    let dp = Selection::from_indices(chosen, items);
    if dp.value >= lower {
        return dp;
    }
    // The factor-2 bound solution itself can beat a coarse scaling.
    if greedy_value >= best_single {
        let mut used = 0;
        let g = by_density.into_iter().filter(|&i| {
            let fit = used + items[i].1 <= budget;
            if fit {
                used += items[i].1;
            }
            fit
        });
        Selection::from_indices(g.collect(), items)
    } else {
        let i = cand.into_iter().find(|&i| items[i].0 == best_single).unwrap();
        Selection::from_indices(vec![i], items)
    }
}

/// Applies a per-frame selector frame by frame over the not-yet-scheduled items.
fn sequential_plan(input: &SchedulerInput, select: impl Fn(&[(f64, u64)], u64) -> Selection) -> FramePlan {
    let prio = priorities(input);
    let mut plan = FramePlan::empty(&input.frame_budgets);
    let mut taken = vec![false; input.items.len()];
    for (f, &budget) in input.frame_budgets.iter().enumerate() {
        let pending: Vec<usize> = (0..input.items.len()).filter(|&i| !taken[i] && prio[i] > 0.0).collect();
        let values: Vec<(f64, u64)> = pending.iter().map(|&i| (prio[i] * input.items[i].size as f64, input.items[i].size)).collect();
        let mut chosen: Vec<usize> = select(&values, budget).items.into_iter().map(|k| pending[k]).collect();
        chosen.sort_by(|&a, &b| {
            prio[b]
                .total_cmp(&prio[a])
                .then_with(|| tie_key(&input.items[a]).cmp(&tie_key(&input.items[b])))
        });
        for i in chosen {
            taken[i] = true;
            plan.push(f, i, &input.items[i]);
        }
    }
    fill_zero_priority(input, &prio, &mut plan);
    plan
}

/// Exact knapsack per frame, frames in order.
pub fn optimal_plan(input: &SchedulerInput, resolution: u64) -> FramePlan {
    sequential_plan(input, |v, b| knapsack_exact(v, b, resolution))
}

/// FPTAS per frame, frames in order.
pub fn fptas_plan(input: &SchedulerInput, eps: f64) -> FramePlan {
    sequential_plan(input, |v, b| fptas_schedule(v, b, eps))
}
