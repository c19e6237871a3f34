//! Scenario fixtures, the closed-loop simulation, outcome metrics, sweeps
//! and report output.

mod metrics;
mod report;
mod scenario;
mod sim;
mod sweep;

pub use metrics::{classify_outcome, compute_reaction_time, StepRecord, DEADLOCK_WINDOW_MS, NEAR_MISS_DISTANCE, STALL_SPEED};
pub use report::{emit_report, read_jsonl, Aggregate, ReportFormat, ReportRow, SweepReport, CSV_HEADER};
pub use scenario::{build_scenario, Scenario};
pub use sim::{run_scenario, RunOutput, PHYSICS_STEP_MS};
pub use sweep::{sweep, SweepConfig};

use serde::{Deserialize, Serialize};

use crate::channel::ChannelConfig;
use crate::error::{Error, Result};
use crate::spatial::{RelevanceMode, RelevanceParams};
use crate::world::SensorSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Overtaking,
    LeftTurn,
    RedLight,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [ScenarioKind::Overtaking, ScenarioKind::LeftTurn, ScenarioKind::RedLight];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Overtaking => "overtaking",
            ScenarioKind::LeftTurn => "left_turn",
            ScenarioKind::RedLight => "red_light",
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scenario {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerKind {
    Greedy,
    Optimal,
    Fptas,
    Agnostic,
    /// No sharing: every vehicle relies on its own sensor.
    Single,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 5] =
        [SchedulerKind::Greedy, SchedulerKind::Optimal, SchedulerKind::Fptas, SchedulerKind::Agnostic, SchedulerKind::Single];

    pub fn name(self) -> &'static str {
        match self {
            SchedulerKind::Greedy => "greedy",
            SchedulerKind::Optimal => "optimal",
            SchedulerKind::Fptas => "fptas",
            SchedulerKind::Agnostic => "agnostic",
            SchedulerKind::Single => "single",
        }
    }
}

impl std::str::FromStr for SchedulerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scheduler {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    SafePassage,
    NearMiss,
    Crash,
    Deadlock,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::SafePassage => "safe_passage",
            Outcome::NearMiss => "near_miss",
            Outcome::Crash => "crash",
            Outcome::Deadlock => "deadlock",
        }
    }
}

/// Collider base speeds (km/h) accepted without `allow_any_speed`.
pub const SPEEDS_KMH: [f64; 3] = [20.0, 30.0, 40.0];

/// The 17 arrival offsets from -2 s to +2 s in 0.25 s steps.
pub fn delta_grid() -> Vec<f64> {
    (0..17).map(|i| -2.0 + 0.25 * i as f64).collect()
}

/// Everything that determines one run. All fields have defaults so partial
/// JSON documents are accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub scheduler: SchedulerKind,
    /// Collider base speed in km/h.
    pub speed_kmh: f64,
    pub allow_any_speed: bool,
    /// Collider arrival at the conflict point relative to the ego's (s).
    pub delta_s: f64,
    /// Vehicles placed inside the scheduling domain.
    pub density: usize,
    pub seed: u64,
    /// Set to false to remove the collider.
    pub collider: bool,
    pub ego_speed_kmh: f64,
    /// Seconds the ego needs to reach the conflict point at its start.
    pub lead_time_s: f64,
    pub max_time_s: f64,
    pub channel: ChannelConfig,
    pub sensor: SensorSpec,
    pub relevance: RelevanceParams,
    pub starvation: bool,
    pub fptas_eps: f64,
    pub dp_resolution: u64,
    /// How long received objects are kept and extrapolated (ms).
    pub hold_ms: u64,
    /// Transmitted bytes per extracted byte. The simulated scan has a single
    /// vertical channel; this stands in for the rest.
    pub payload_scale: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioKind::RedLight,
            scheduler: SchedulerKind::Greedy,
            speed_kmh: 30.0,
            allow_any_speed: false,
            delta_s: 0.0,
            density: 10,
            seed: 0,
            collider: true,
            ego_speed_kmh: 30.0,
            lead_time_s: 6.0,
            max_time_s: 40.0,
            channel: ChannelConfig::default(),
            sensor: SensorSpec { range: 100.0, angular_resolution: 0.01, points_per_hit: 1, mount_height: 1.8, ground_step: None },
            relevance: RelevanceParams { threshold: 7.0, horizon_ms: 10_000, mode: RelevanceMode::Boolean },
            starvation: true,
            fptas_eps: 0.1,
            dp_resolution: crate::scheduler::DEFAULT_RESOLUTION,
            hold_ms: 1000,
            payload_scale: 6,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.allow_any_speed && !SPEEDS_KMH.contains(&self.speed_kmh) {
            return Err(Error::InvalidConfig(format!("speed {} km/h not in {SPEEDS_KMH:?}", self.speed_kmh)));
        }
        if !(self.speed_kmh > 0.0) || !(self.ego_speed_kmh > 0.0) {
            return Err(Error::InvalidConfig("speeds must be positive".into()));
        }
        if !(-2.0..=2.0).contains(&self.delta_s) {
            return Err(Error::InvalidConfig(format!("delta {} s outside [-2, 2]", self.delta_s)));
        }
        if !(5..=40).contains(&self.density) {
            return Err(Error::InvalidConfig(format!("density {} outside [5, 40]", self.density)));
        }
        if !(self.lead_time_s > 2.0) || !(self.max_time_s > self.lead_time_s) {
            return Err(Error::InvalidConfig("need lead_time_s > 2 and max_time_s > lead_time_s".into()));
        }
        if !(self.fptas_eps > 0.0 && self.fptas_eps < 1.0) {
            return Err(Error::InvalidConfig("fptas_eps must lie in (0, 1)".into()));
        }
        if self.payload_scale == 0 {
            return Err(Error::InvalidConfig("payload_scale must be at least 1".into()));
        }
        if !self.channel.interval_ms.is_multiple_of(10) {
            return Err(Error::InvalidConfig("decision interval must be a multiple of the 10 ms physics step".into()));
        }
        self.channel.validate()?;
        self.sensor.validate()
    }
}

/// Metrics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub outcome: Outcome,
    /// Seconds between first awareness of the collider and the last moment the
    /// ego could still stop short of the conflict; `None` without a collider.
    pub reaction_time_s: Option<f64>,
    /// Closest ego-collider footprint distance (m); `None` without a collider.
    pub closest_distance_m: Option<f64>,
    /// Share of intervals with the collider relevant to the ego in which the
    /// ego's fused view contained it; `None` if it was never relevant.
    pub collider_visible_fraction: Option<f64>,
    pub mean_collider_points: f64,
    /// Delivered reward summed over intervals.
    pub total_reward: f64,
    /// Scheduler compute time per interval (ms).
    pub schedule_ms: Vec<f64>,
    /// Completion time (ms from interval start) of every delivered transmission.
    pub scheduled_delays_ms: Vec<f64>,
    pub intervals: u64,
    pub sim_time_s: f64,
}

impl ScenarioResult {
    pub fn compute_ms_p50(&self) -> f64 {
        percentile(&self.schedule_ms, 0.5)
    }
}

/// Nearest-rank percentile; 0 for an empty slice.
pub fn percentile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}
