//! Per-run report rows, aggregates, and CSV / JSONL output.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Outcome, ScenarioConfig, ScenarioKind, ScenarioResult, SchedulerKind};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "scenario,scheduler,density,speed,delta,seed,outcome,reaction_s,closest_m,vis_frac,reward,compute_ms_p50";

/// One line of a sweep report. Missing metrics are empty in CSV and null in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario: ScenarioKind,
    pub scheduler: SchedulerKind,
    pub density: usize,
    pub speed: f64,
    pub delta: f64,
    pub seed: u64,
    pub outcome: Outcome,
    pub reaction_s: Option<f64>,
    pub closest_m: Option<f64>,
    pub vis_frac: Option<f64>,
    pub reward: f64,
    pub compute_ms_p50: f64,
}

impl ReportRow {
    pub fn new(cfg: &ScenarioConfig, result: &ScenarioResult) -> Self {
        Self {
            scenario: cfg.scenario,
            scheduler: cfg.scheduler,
            density: cfg.density,
            speed: cfg.speed_kmh,
            delta: cfg.delta_s,
            seed: cfg.seed,
            outcome: result.outcome,
            reaction_s: result.reaction_time_s,
            closest_m: result.closest_distance_m.filter(|d| d.is_finite()),
            vis_frac: result.collider_visible_fraction,
            reward: result.total_reward,
            compute_ms_p50: result.compute_ms_p50(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Jsonl,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "jsonl" => Ok(Self::Jsonl),
            _ => Err(Error::InvalidConfig(format!("unknown format {s:?}"))),
        }
    }
}

/// Outcome counts and means for one (scenario, scheduler) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scenario: ScenarioKind,
    pub scheduler: SchedulerKind,
    pub runs: usize,
    pub crash: usize,
    pub near_miss: usize,
    pub deadlock: usize,
    pub safe_passage: usize,
    pub mean_reaction_s: Option<f64>,
    pub mean_vis_frac: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<Aggregate>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, sum) = xs.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    (n > 0).then(|| sum / n as f64)
}

impl SweepReport {
    pub fn new(rows: Vec<ReportRow>) -> Self {
        let mut groups: BTreeMap<(ScenarioKind, SchedulerKind), Vec<&ReportRow>> = BTreeMap::new();
        for r in &rows {
            groups.entry((r.scenario, r.scheduler)).or_default().push(r);
        }
        let aggregates = groups
            .into_iter()
            .map(|((scenario, scheduler), rs)| {
                let count = |o: Outcome| rs.iter().filter(|r| r.outcome == o).count();
                Aggregate {
                    scenario,
                    scheduler,
                    runs: rs.len(),
                    crash: count(Outcome::Crash),
                    near_miss: count(Outcome::NearMiss),
                    deadlock: count(Outcome::Deadlock),
                    safe_passage: count(Outcome::SafePassage),
                    mean_reaction_s: mean(rs.iter().filter_map(|r| r.reaction_s)),
                    mean_vis_frac: mean(rs.iter().filter_map(|r| r.vis_frac)),
                }
            })
            .collect();
        Self { rows, aggregates }
    }

    pub fn aggregate(&self, scenario: ScenarioKind, scheduler: SchedulerKind) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.scenario == scenario && a.scheduler == scheduler)
    }
}

/// Writes `runs.csv` or `runs.jsonl` plus `aggregates.json` into `out_dir`
/// and returns the path of the runs file.
pub fn emit_report(report: &SweepReport, format: ReportFormat, out_dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let path = match format {
        ReportFormat::Csv => {
            let path = out_dir.join("runs.csv");
            let mut w = csv::Writer::from_path(&path)?;
            for r in &report.rows {
                w.serialize(r)?;
            }
            w.flush()?;
            path
        }
        ReportFormat::Jsonl => {
            let path = out_dir.join("runs.jsonl");
            let mut w = BufWriter::new(File::create(&path)?);
            for r in &report.rows {
                serde_json::to_writer(&mut w, r)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
            path
        }
    };
    let agg = BufWriter::new(File::create(out_dir.join("aggregates.json"))?);
    serde_json::to_writer_pretty(agg, &report.aggregates)?;
    Ok(path)
}

pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            rows.push(serde_json::from_str(&line)?);
        }
    }
    Ok(rows)
}
