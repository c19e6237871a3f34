//! Broadcast scheduling over TDMA frames: reward model, max-weight greedy,
//! knapsack baselines, the relevance-blind round robin, and a small-scale MDP.

mod agnostic;
mod greedy;
mod knapsack;
mod mdp;
pub mod random;

pub use agnostic::{agnostic_schedule, AgnosticState};
pub use greedy::greedy_schedule;
pub use knapsack::{fptas_plan, fptas_schedule, knapsack_exact, optimal_plan, Selection, DEFAULT_RESOLUTION};
pub use mdp::{mdp_optimal, MdpSolution, MDP_MAX_FRAMES, MDP_MAX_OBJECTS, MDP_MAX_VEHICLES};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::VehicleId;
use crate::spatial::ObjectId;

/// Floor applied to population variances in the starvation priority.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// `y = (1 - v) * r`.
pub fn pair_reward(visible: bool, relevance: f64) -> f64 {
    if visible {
        0.0
    } else {
        relevance
    }
}

/// One shareable (transmitter, object) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub tx: VehicleId,
    pub object: ObjectId,
    pub size: u64,
    /// Reward per receiver, indexed like `SchedulerInput::peers`.
    pub rewards: Vec<f64>,
    /// Intervals this item has gone unserved.
    pub starvation: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerInput {
    /// Domain members, ascending.
    pub peers: Vec<VehicleId>,
    pub items: Vec<Item>,
    /// `received[item][peer]`: receiver already holds the item this interval.
    pub received: Vec<Vec<bool>>,
    pub frame_budgets: Vec<u64>,
    pub starvation: bool,
}

impl SchedulerInput {
    /// Input with nothing received yet.
    pub fn new(peers: Vec<VehicleId>, items: Vec<Item>, frame_budgets: Vec<u64>, starvation: bool) -> Self {
        let received = items.iter().map(|_| vec![false; peers.len()]).collect();
        Self { peers, items, received, frame_budgets, starvation }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_budgets.is_empty() {
            return Err(Error::InvalidConfig("at least one frame required".into()));
        }
        if self.received.len() != self.items.len() {
            return Err(Error::InvalidConfig("reception matrix does not match items".into()));
        }
        for (it, h) in self.items.iter().zip(&self.received) {
            if it.size == 0 {
                return Err(Error::InvalidConfig(format!("item {}/{} has zero size", it.tx, it.object)));
            }
            if it.rewards.len() != self.peers.len() || h.len() != self.peers.len() {
                return Err(Error::InvalidConfig("per-peer vectors must match the peer list".into()));
            }
            if it.rewards.iter().any(|y| !(0.0..=1.0).contains(y)) {
                return Err(Error::InvalidConfig("rewards must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    /// Total over frames of the byte budgets.
    pub fn total_budget(&self) -> u64 {
        self.frame_budgets.iter().sum()
    }
}

/// `H = sum over receivers j != tx of y_j * (1 - h_j)`.
pub fn object_weight(item: &Item, received: &[bool], peers: &[VehicleId]) -> f64 {
    item.rewards
        .iter()
        .zip(received)
        .zip(peers)
        .filter(|(_, j)| **j != item.tx)
        .map(|((y, h), _)| if *h { 0.0 } else { *y })
        .sum()
}

/// Population statistics used to normalise the starvation priority.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationStats {
    pub size_variance: f64,
    pub starvation_variance: f64,
}

impl PopulationStats {
    pub fn of(items: &[Item]) -> Self {
        let var = |xs: &mut dyn Iterator<Item = f64>| {
            let v: Vec<f64> = xs.collect();
            if v.is_empty() {
                return VARIANCE_FLOOR;
            }
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).max(VARIANCE_FLOOR)
        };
        Self {
            size_variance: var(&mut items.iter().map(|i| i.size as f64)),
            starvation_variance: var(&mut items.iter().map(|i| i.starvation as f64)),
        }
    }
}

/// `(H * var_s / s) * (max(m, 1) / var_m)`.
pub fn starvation_weight(h: f64, size: u64, m: u32, stats: &PopulationStats) -> f64 {
    (h * stats.size_variance / size as f64) * (m.max(1) as f64 / stats.starvation_variance)
}

/// Ranking value of each item: starvation priority, or plain `H / s`.
pub fn priorities(input: &SchedulerInput) -> Vec<f64> {
    let stats = PopulationStats::of(&input.items);
    input
        .items
        .iter()
        .zip(&input.received)
        .map(|(it, h)| {
            let w = object_weight(it, h, &input.peers);
            if input.starvation {
                starvation_weight(w, it.size, it.starvation, &stats)
            } else {
                w / it.size as f64
            }
        })
        .collect()
}

/// Ordering used to break ties: (transmitter id, object id).
pub(crate) fn tie_key(it: &Item) -> (VehicleId, ObjectId) {
    (it.tx, it.object)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub frame: usize,
    /// Index into `SchedulerInput::items`.
    pub item: usize,
    pub tx: VehicleId,
    pub object: ObjectId,
    pub size: u64,
}

/// Per-frame transmissions in broadcast order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FramePlan {
    pub assignments: Vec<Assignment>,
    pub used: Vec<u64>,
    pub budgets: Vec<u64>,
}

impl FramePlan {
    pub fn empty(budgets: &[u64]) -> Self {
        Self { assignments: Vec::new(), used: vec![0; budgets.len()], budgets: budgets.to_vec() }
    }

    pub fn fits(&self, frame: usize, size: u64) -> bool {
        self.used[frame] + size <= self.budgets[frame]
    }

    pub fn push(&mut self, frame: usize, item: usize, it: &Item) {
        self.used[frame] += it.size;
        self.assignments.push(Assignment { frame, item, tx: it.tx, object: it.object, size: it.size });
    }

    /// Frames in order, then insertion order within a frame.
    pub fn normalize(&mut self) {
        self.assignments.sort_by_key(|a| a.frame);
    }

    pub fn contains(&self, item: usize) -> bool {
        self.assignments.iter().any(|a| a.item == item)
    }

    /// Sum of `H` over scheduled items, evaluated on the input's reception state.
    pub fn total_weight(&self, input: &SchedulerInput) -> f64 {
        self.assignments
            .iter()
            .map(|a| object_weight(&input.items[a.item], &input.received[a.item], &input.peers))
            .sum()
    }

    /// Checks per-frame budgets and single scheduling of each item.
    pub fn check(&self, input: &SchedulerInput) -> Result<()> {
        let mut used = vec![0u64; self.budgets.len()];
        let mut seen = vec![false; input.items.len()];
        for a in &self.assignments {
            if a.frame >= used.len() || a.item >= seen.len() {
                return Err(Error::InvalidConfig("assignment out of range".into()));
            }
            if std::mem::replace(&mut seen[a.item], true) {
                return Err(Error::InvalidConfig(format!("item {} scheduled twice", a.item)));
            }
            used[a.frame] += input.items[a.item].size;
        }
        for (f, (u, b)) in used.iter().zip(&self.budgets).enumerate() {
            if u > b || *u != self.used[f] {
                return Err(Error::InvalidConfig(format!("frame {f} uses {u} of {b} bytes")));
            }
        }
        Ok(())
    }
}

/// Fills leftover capacity with zero-priority items, in tie order, unless a
/// positive-priority item that fits some frame is still waiting.
pub(crate) fn fill_zero_priority(input: &SchedulerInput, prio: &[f64], plan: &mut FramePlan) {
    let max_budget = input.frame_budgets.iter().copied().max().unwrap_or(0);
    let waiting_positive = (0..input.items.len())
        .any(|i| prio[i] > 0.0 && input.items[i].size <= max_budget && !plan.contains(i));
    if waiting_positive {
        return;
    }
    let mut zero: Vec<usize> = (0..input.items.len()).filter(|&i| prio[i] <= 0.0).collect();
    zero.sort_by_key(|&i| tie_key(&input.items[i]));
    for f in 0..input.frame_budgets.len() {
        for &i in &zero {
            if !plan.contains(i) && plan.fits(f, input.items[i].size) {
                plan.push(f, i, &input.items[i]);
            }
        }
    }
    plan.normalize();
}

/// Delivery probabilities between vehicles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMatrix {
    pub ids: Vec<VehicleId>,
    p: Vec<f64>,
}

impl ChannelMatrix {
    /// Builds from a pairwise function; diagonal forced to 1 and entries clamped.
    pub fn from_fn(ids: Vec<VehicleId>, f: impl Fn(VehicleId, VehicleId) -> f64) -> Self {
        let n = ids.len();
        let mut p = vec![1.0; n * n];
        for (a, ia) in ids.iter().enumerate() {
            for (b, ib) in ids.iter().enumerate() {
                if a != b {
                    p[a * n + b] = f(*ia, *ib).clamp(0.0, 1.0);
                }
            }
        }
        Self { ids, p }
    }

    pub fn uniform(ids: Vec<VehicleId>, p: f64) -> Self {
        Self::from_fn(ids, |_, _| p)
    }

    fn index(&self, id: VehicleId) -> Option<usize> {
        self.ids.iter().position(|x| *x == id)
    }

    /// Delivery probability from `tx` to `rx`; unknown vehicles get 0.
    pub fn get(&self, tx: VehicleId, rx: VehicleId) -> f64 {
        if tx == rx {
            return 1.0;
        }
        match (self.index(tx), self.index(rx)) {
            (Some(a), Some(b)) => self.p[a * self.ids.len() + b],
            _ => 0.0,
        }
    }
}
