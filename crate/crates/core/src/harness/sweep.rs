//! Grid sweeps over scenario parameters.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::ReportRow;
use super::{delta_grid, run_scenario, ScenarioConfig, ScenarioKind, SchedulerKind, SPEEDS_KMH};
use crate::error::{Error, Result};

/// Cartesian product of the listed values applied on top of `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub scenarios: Vec<ScenarioKind>,
    pub schedulers: Vec<SchedulerKind>,
    pub densities: Vec<usize>,
    pub speeds: Vec<f64>,
    pub deltas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub base: ScenarioConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            scenarios: ScenarioKind::ALL.to_vec(),
            schedulers: vec![SchedulerKind::Single, SchedulerKind::Agnostic, SchedulerKind::Greedy],
            densities: vec![5, 20, 40],
            speeds: SPEEDS_KMH.to_vec(),
            deltas: delta_grid(),
            seeds: vec![0, 1, 2],
            base: ScenarioConfig::default(),
        }
    }
}

impl SweepConfig {
    /// Configurations in a fixed nesting order: scenario, scheduler, density,
    /// speed, delta, seed.
    pub fn expand(&self) -> Result<Vec<ScenarioConfig>> {
        let mut out = Vec::new();
        for &scenario in &self.scenarios {
            for &scheduler in &self.schedulers {
                for &density in &self.densities {
                    for &speed_kmh in &self.speeds {
                        for &delta_s in &self.deltas {
                            for &seed in &self.seeds {
                                let c = ScenarioConfig { scenario, scheduler, density, speed_kmh, delta_s, seed, ..self.base.clone() };
                                c.validate()?;
                                out.push(c);
                            }
                        }
                    }
                }
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidConfig("sweep expands to no runs".into()));
        }
        Ok(out)
    }
}

/// Runs every configuration (in parallel) and returns rows in expansion order.
pub fn sweep(cfg: &SweepConfig) -> Result<Vec<ReportRow>> {
    let runs = cfg.expand()?;
    runs.par_iter()
        .map(|c| run_scenario(c).map(|out| ReportRow::new(c, &out.result)))
        .collect()
}
