//! TDMA frame budgets, link loss models and stochastic plan execution.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::VehicleId;
use crate::scheduler::{ChannelMatrix, FramePlan, SchedulerInput};
use crate::spatial::ObjectId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossModel {
    Constant { p: f64 },
    /// `p0 * exp(-d / delta)`.
    Exponential { p0: f64, delta: f64 },
    /// Piecewise-linear over `(distance, probability)` points sorted by distance.
    Table { points: Vec<(f64, f64)> },
}

impl Default for LossModel {
    fn default() -> Self {
        LossModel::Exponential { p0: 0.95, delta: 200.0 }
    }
}

/// Delivery probability at distance `d`, clamped to `[0, 1]`.
pub fn link_probability(d: f64, model: &LossModel) -> f64 {
    let d = d.max(0.0);
    let p = match model {
        LossModel::Constant { p } => *p,
        LossModel::Exponential { p0, delta } => p0 * (-d / delta).exp(),
        LossModel::Table { points } => match points.iter().position(|(x, _)| *x >= d) {
            None => points.last().map_or(0.0, |(_, p)| *p),
            Some(0) => points[0].1,
            Some(i) => {
                let ((x0, p0), (x1, p1)) = (points[i - 1], points[i]);
                if x1 > x0 {
                    p0 + (p1 - p0) * (d - x0) / (x1 - x0)
                } else {
                    p1
                }
            }
        },
    };
    p.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelConfig {
    pub bandwidth_bps: f64,
    pub interval_ms: u64,
    pub frame_ms: u64,
    pub loss: LossModel,
    pub radio_range: f64,
    /// Share of the interval's bytes reserved for control messages, taken from frame 0.
    pub control_overhead: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            bandwidth_bps: 7.2e6,
            interval_ms: 100,
            frame_ms: 10,
            loss: LossModel::default(),
            radio_range: 170.0,
            control_overhead: 0.02,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_bps > 0.0) {
            return Err(Error::InvalidConfig("bandwidth must be positive".into()));
        }
        if self.frame_ms == 0 || self.frame_ms > self.interval_ms {
            return Err(Error::InvalidConfig("frame duration must lie in (0, interval]".into()));
        }
        if !(0.0..1.0).contains(&self.control_overhead) {
            return Err(Error::InvalidConfig("control overhead must lie in [0, 1)".into()));
        }
        match &self.loss {
            LossModel::Constant { p } if !(0.0..=1.0).contains(p) => Err(Error::InvalidConfig("p must lie in [0, 1]".into())),
            LossModel::Exponential { p0, delta } if !(0.0..=1.0).contains(p0) || !(*delta > 0.0) => {
                Err(Error::InvalidConfig("exponential loss needs p0 in [0, 1] and delta > 0".into()))
            }
            LossModel::Table { points } if points.is_empty() || points.windows(2).any(|w| w[1].0 < w[0].0 || w[1].1 > w[0].1) => {
                Err(Error::InvalidConfig("loss table must be non-empty, sorted and non-increasing".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn frames(&self) -> usize {
        (self.interval_ms / self.frame_ms.max(1)) as usize
    }

    pub fn bytes_in(&self, ms: f64) -> f64 {
        self.bandwidth_bps * ms / 1000.0 / 8.0
    }

    fn overhead_bytes(&self) -> u64 {
        (self.bytes_in(self.interval_ms as f64) * self.control_overhead).round() as u64
    }

    /// Airtime of `bytes` in ms.
    pub fn airtime_ms(&self, bytes: u64) -> f64 {
        bytes as f64 * 8.0 / self.bandwidth_bps * 1000.0
    }

    pub fn budgets(&self) -> Vec<u64> {
        (0..self.frames()).map(|n| frame_budget(self, n)).collect()
    }

    /// Probability including the radio-range cutoff.
    pub fn link(&self, d: f64) -> f64 {
        if d > self.radio_range {
            0.0
        } else {
            link_probability(d, &self.loss)
        }
    }
}

/// `B * T / 8` bytes, less the control overhead in frame 0.
pub fn frame_budget(cfg: &ChannelConfig, n: usize) -> u64 {
    let raw = cfg.bytes_in(cfg.frame_ms as f64).floor() as u64;
    if n == 0 {
        raw.saturating_sub(cfg.overhead_bytes())
    } else {
        raw
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transmission {
    pub frame: usize,
    pub item: usize,
    pub tx: VehicleId,
    pub object: ObjectId,
    pub size: u64,
    pub start_ms: f64,
    pub end_ms: f64,
    /// Delivery per receiver, ascending receiver id.
    pub outcomes: Vec<(VehicleId, bool)>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReceptionLog {
    pub transmissions: Vec<Transmission>,
    pub frame_bytes: Vec<u64>,
}

impl ReceptionLog {
    pub fn delivered(&self, rx: VehicleId, item: usize) -> bool {
        self.transmissions
            .iter()
            .any(|t| t.item == item && t.outcomes.iter().any(|(r, ok)| *r == rx && *ok))
    }
}

/// Runs the plan frame by frame; each broadcast reaches each other domain
/// member independently with probability `P[tx][rx]`.
pub fn execute_plan(plan: &FramePlan, input: &SchedulerInput, matrix: &ChannelMatrix, cfg: &ChannelConfig, seed: u64) -> ReceptionLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log = ReceptionLog { transmissions: Vec::new(), frame_bytes: vec![0; plan.budgets.len()] };
    let lead = cfg.airtime_ms(cfg.overhead_bytes());
    let mut cursor = vec![0.0f64; plan.budgets.len()];
    for a in &plan.assignments {
        let frame_start = a.frame as f64 * cfg.frame_ms as f64 + if a.frame == 0 { lead } else { 0.0 };
        let start = frame_start + cursor[a.frame];
        let air = cfg.airtime_ms(a.size);
        cursor[a.frame] += air;
        log.frame_bytes[a.frame] += a.size;
        let outcomes = input
            .peers
            .iter()
            .filter(|r| **r != a.tx)
            .map(|r| {
                let p = matrix.get(a.tx, *r);
                (*r, rng.gen::<f64>() < p)
            })
            .collect();
        log.transmissions.push(Transmission {
            frame: a.frame,
            item: a.item,
            tx: a.tx,
            object: a.object,
            size: a.size,
            start_ms: start,
            end_ms: start + air,
            outcomes,
        });
    }
    log
}

pub const TRACE_HEADER: &str = "interval,frame,tx,object,size_b,start_ms,end_ms,outcomes";

/// One CSV row per transmission; outcomes as `rx:0|1` joined by `;`.
pub fn write_trace<W: Write>(w: &mut W, interval: u64, log: &ReceptionLog) -> std::io::Result<()> {
    for t in &log.transmissions {
        let outcomes: Vec<String> = t.outcomes.iter().map(|(r, ok)| format!("{}:{}", r.0, *ok as u8)).collect();
        writeln!(
            w,
            "{interval},{},{},{},{},{:.4},{:.4},{}",
            t.frame,
            t.tx.0,
            t.object,
            t.size,
            t.start_ms,
            t.end_ms,
            outcomes.join(";")
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduler::{greedy_schedule, Item};

    fn no_overhead() -> ChannelConfig {
        ChannelConfig { control_overhead: 0.0, ..ChannelConfig::default() }
    }

    #[test]
    fn budgets() {
        assert_eq!(frame_budget(&no_overhead(), 0), 9000);
        assert_eq!(frame_budget(&ChannelConfig::default(), 3), 9000);
        assert_eq!(frame_budget(&ChannelConfig::default(), 0), 9000 - 1800);
        let single = ChannelConfig { frame_ms: 100, ..no_overhead() };
        assert_eq!(frame_budget(&single, 0), 90_000);
        assert_eq!(single.frames(), 1);
        let zero = ChannelConfig { frame_ms: 0, ..no_overhead() };
        assert_eq!(frame_budget(&zero, 0), 0);
        assert!(zero.validate().is_err());
    }

    #[test]
    fn loss_models() {
        assert_eq!(link_probability(123.0, &LossModel::Constant { p: 0.95 }), 0.95);
        let e = LossModel::Exponential { p0: 0.95, delta: 200.0 };
        assert_eq!(link_probability(0.0, &e), 0.95);
        assert!((link_probability(200.0, &e) - 0.95 / std::f64::consts::E).abs() < 1e-12);
        let t = LossModel::Table { points: vec![(0.0, 1.0), (100.0, 0.5), (200.0, 0.0)] };
        assert!((link_probability(50.0, &t) - 0.75).abs() < 1e-12);
        assert_eq!(link_probability(500.0, &t), 0.0);
    }

    fn one_item_input(peers: u32) -> SchedulerInput {
        let ids: Vec<VehicleId> = (0..peers).map(VehicleId).collect();
        let mut rewards = vec![1.0; peers as usize];
        rewards[0] = 0.0;
        let items = vec![
            Item { tx: VehicleId(0), object: ObjectId(1), size: 900, rewards: rewards.clone(), starvation: 0 },
            Item { tx: VehicleId(0), object: ObjectId(2), size: 450, rewards: vec![0.0; peers as usize], starvation: 0 },
        ];
        SchedulerInput::new(ids, items, no_overhead().budgets(), false)
    }

    #[test]
    fn lossless_and_dead_channels() {
        let cfg = no_overhead();
        let input = one_item_input(3);
        let plan = greedy_schedule(&input);
        let log = execute_plan(&plan, &input, &ChannelMatrix::uniform(input.peers.clone(), 1.0), &cfg, 1);
        assert!(log.transmissions.iter().all(|t| t.outcomes.iter().all(|(_, ok)| *ok)));
        assert!((log.transmissions[0].end_ms - 1.0).abs() < 1e-12);
        assert!(log.transmissions[1].end_ms > log.transmissions[0].end_ms);
        let dead = execute_plan(&plan, &input, &ChannelMatrix::uniform(input.peers.clone(), 0.0), &cfg, 1);
        assert!(dead.transmissions.iter().all(|t| t.outcomes.iter().all(|(_, ok)| !*ok)));
        assert_eq!(dead.frame_bytes.iter().sum::<u64>(), 1350);
    }

    #[test]
    fn trace_rows() {
        let cfg = no_overhead();
        let input = one_item_input(2);
        let plan = greedy_schedule(&input);
        let log = execute_plan(&plan, &input, &ChannelMatrix::uniform(input.peers.clone(), 1.0), &cfg, 7);
        let mut out = Vec::new();
        write_trace(&mut out, 4, &log).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next().unwrap(), "4,0,0,0000000000000001,900,0.0000,1.0000,1:1");
    }
}
