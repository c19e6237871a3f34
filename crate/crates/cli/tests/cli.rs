use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coopercept"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn run_writes_result_report_and_trace() {
    let out = scratch("cli_run");
    let status = bin()
        .args(["run", "--scenario", "red_light", "--scheduler", "greedy", "--density", "5", "--speed", "30", "--delta", "-0.5", "--seed", "1", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let result: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert!(result["outcome"].is_string());
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("interval,frame,tx,object"));
    let runs = std::fs::read_to_string(out.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 2);
}

#[test]
fn run_twice_gives_identical_traces() {
    let (a, b) = (scratch("cli_replay_a"), scratch("cli_replay_b"));
    for out in [&a, &b] {
        let ok = bin()
            .args(["run", "--scenario", "left_turn", "--scheduler", "agnostic", "--density", "5", "--seed", "3", "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert!(ok.success());
    }
    assert_eq!(std::fs::read(a.join("trace.csv")).unwrap(), std::fs::read(b.join("trace.csv")).unwrap());
}

#[test]
fn sweep_writes_jsonl_rows() {
    let dir = scratch("cli_sweep");
    std::fs::create_dir_all(&dir).unwrap();
    let config = dir.join("sweep.json");
    std::fs::write(
        &config,
        r#"{"scenarios":["overtaking"],"schedulers":["single","greedy"],"densities":[5],"speeds":[20.0],"deltas":[0.0],"seeds":[0]}"#,
    )
    .unwrap();
    let out = dir.join("out");
    let ok = bin().args(["sweep", "--config"]).arg(&config).arg("--out").arg(&out).args(["--format", "jsonl"]).status().unwrap();
    assert!(ok.success());
    let rows = std::fs::read_to_string(out.join("runs.jsonl")).unwrap();
    assert_eq!(rows.lines().count(), 2);
    assert!(out.join("aggregates.json").exists());
}

#[test]
fn rejects_bad_arguments() {
    let out = scratch("cli_bad");
    let speed = bin().args(["run", "--scenario", "red_light", "--scheduler", "greedy", "--speed", "55", "--out"]).arg(&out).output().unwrap();
    assert!(!speed.status.success());
    assert!(String::from_utf8_lossy(&speed.stderr).contains("speed"));
    let scenario = bin().args(["run", "--scenario", "roundabout", "--scheduler", "greedy", "--out"]).arg(&out).output().unwrap();
    assert!(!scenario.status.success());
}
