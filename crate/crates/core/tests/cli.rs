mod common;

use std::fs;
use std::process::Command;

use scrollfetch::metrics::ComparisonReport;
use scrollfetch::sim::read_event_log;
use scrollfetch::traces::UserTrace;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scrollfetch"))
}

fn config() -> std::path::PathBuf {
    common::data_dir().join("defaults.toml")
}

#[test]
fn validate_prints_derived_facts() {
    let out = bin().arg("validate").arg(config()).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("120 videos, 15 segments each"), "{text}");
    assert!(text.contains("throughput trace1: 200.0s"), "{text}");
    assert!(text.contains("sessions: 360"), "{text}");
}

#[test]
fn validate_fails_with_all_violations() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(
        &path,
        r#"
rng_seed = 1
policies = []
throughput_traces = [{ name = "a", path = "nope.txt" }]
user_traces = [{ name = "u", mean_s = 12.0 }]
[playlist]
videos = 3
duration_s = 15.5
bitrate_kbps = 2000.0
segment_duration_s = 1.0
"#,
    )
    .unwrap();
    let out = bin().arg("validate").arg(&path).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("at least one policy"), "{err}");
    assert!(err.contains("nope.txt"), "{err}");
    assert!(err.contains("user trace u"), "{err}");
    assert!(err.contains("multiple of"), "{err}");
    assert!(err.contains("4 problem(s)"), "{err}");
}

#[test]
fn run_writes_reports_and_logs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["run", "--seed", "5"])
        .arg(config())
        .env("SCROLLFETCH_OUT", &out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.csv", "sessions.csv", "reductions.csv", "meta.json", "config.toml"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    assert!(out_dir.join("tables/waste_s__user1.csv").exists());
    let logs: Vec<_> = fs::read_dir(out_dir.join("logs")).unwrap().collect();
    assert_eq!(logs.len(), 360);
    let log = read_event_log(out_dir.join("logs/waterfall__trace3__user2__r007.jsonl")).unwrap();
    assert!(!log.is_empty());
    let meta = fs::read_to_string(out_dir.join("meta.json")).unwrap();
    assert!(meta.contains("\"rng_seed\": 5"), "{meta}");
}

#[test]
fn json_format_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["run", "--format", "json", "--no-event-logs", "--out"])
        .arg(dir.path())
        .arg(config())
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(dir.path().join("report.json")).unwrap();
    let report = ComparisonReport::from_json(&text).unwrap();
    assert_eq!(report.cells.len(), 18);
    assert_eq!(report.sessions.len(), 360);
}

#[test]
fn gen_trace_user_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for name in ["a.txt", "b.txt"] {
        let path = dir.path().join(name);
        let status = bin()
            .args(["gen-trace", "user", "--mean", "12", "--std", "6", "--total", "180", "--seed", "3", "--out"])
            .arg(&path)
            .status()
            .unwrap();
        assert!(status.success());
        texts.push(fs::read_to_string(&path).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
    let trace = UserTrace::load(dir.path().join("a.txt")).unwrap();
    assert!(trace.total_s() >= 180.0);
    assert!(trace.provenance().unwrap().contains("seed=3"));
}

#[test]
fn gen_trace_rejects_bad_parameters() {
    let out = bin()
        .args(["gen-trace", "user", "--mean", "0", "--std", "1", "--total", "10"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
