use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coopercept::harness::{
    emit_report, run_scenario, sweep, ReportFormat, ReportRow, ScenarioConfig, ScenarioKind, SchedulerKind, SweepConfig, SweepReport,
};

#[derive(Parser)]
#[command(name = "coopercept", version, about = "Cooperative perception scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its result, report row and channel trace.
    Run {
        #[arg(long)]
        scenario: ScenarioKind,
        #[arg(long)]
        scheduler: SchedulerKind,
        /// Vehicles in the scheduling domain.
        #[arg(long, default_value_t = 10)]
        density: usize,
        /// Collider speed in km/h.
        #[arg(long, default_value_t = 30.0)]
        speed: f64,
        /// Collider arrival offset in seconds.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON file with base settings; the flags above override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the Cartesian product described by a sweep config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
    },
}

type AnyResult<T> = Result<T, Box<dyn std::error::Error>>;

fn run(cmd: Command) -> AnyResult<()> {
    match cmd {
        Command::Run { scenario, scheduler, density, speed, delta, seed, config, out } => {
            let base: ScenarioConfig = match config {
                Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
                None => ScenarioConfig::default(),
            };
            let cfg = ScenarioConfig { scenario, scheduler, density, speed_kmh: speed, delta_s: delta, seed, ..base };
            cfg.validate()?;
            let output = run_scenario(&cfg)?;
            fs::create_dir_all(&out)?;
            fs::write(out.join("result.json"), serde_json::to_string_pretty(&output.result)?)?;
            fs::write(out.join("trace.csv"), &output.trace)?;
            let report = SweepReport::new(vec![ReportRow::new(&cfg, &output.result)]);
            emit_report(&report, ReportFormat::Csv, &out)?;
            let r = &output.result;
            println!(
                "{} {} density={} speed={} delta={} seed={}: {} closest={:.2}m vis={} in {:.1}s simulated",
                scenario.name(),
                scheduler.name(),
                density,
                speed,
                delta,
                seed,
                r.outcome.name(),
                r.closest_distance_m.unwrap_or(f64::NAN),
                r.collider_visible_fraction.map_or("-".into(), |v| format!("{v:.2}")),
                r.sim_time_s
            );
        }
        Command::Sweep { config, out, format } => {
            let cfg: SweepConfig = serde_json::from_str(&fs::read_to_string(config)?)?;
            let report = SweepReport::new(sweep(&cfg)?);
            let path = emit_report(&report, format, &out)?;
            for a in &report.aggregates {
                println!(
                    "{:<10} {:<9} runs={:<4} crash={:<3} near_miss={:<3} deadlock={:<3} safe={}",
                    a.scenario.name(),
                    a.scheduler.name(),
                    a.runs,
                    a.crash,
                    a.near_miss,
                    a.deadlock,
                    a.safe_passage
                );
            }
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
