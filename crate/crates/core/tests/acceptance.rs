//! Exit criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::oracle::{compare_logs, run_oracle, OracleCase};
use common::{oracle_policy, run_engine};
use scrollfetch::experiment::{run_matrix, Experiment};
use scrollfetch::metrics::{relative_reduction, ComparisonReport, Metric};
use scrollfetch::model::{Playlist, SessionConfig};
use scrollfetch::policy::{compute_b1, compute_lookahead_k, Policy, PolicyKind};
use scrollfetch::sim::{simulate_session, EventKind};
use scrollfetch::traces::{generate_user_trace, ThroughputTrace};

const R: f64 = 2000.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(limit: Duration, started: Instant) -> (bool, String) {
    let took = started.elapsed();
    (took < limit, format!("{:.2}s of {:.0}s budget", took.as_secs_f64(), limit.as_secs_f64()))
}

fn threshold_tables() -> Outcome {
    let started = Instant::now();
    let mut bad = Vec::new();
    for i in 0..=400u32 {
        let alpha = f64::from(i) * 0.01 * R;
        let b1 = match i {
            0..=150 => 4,
            151..=250 => 3,
            _ => 2,
        };
        let k = match i {
            0..=150 => 7,
            151..=200 => 4,
            201..=250 => 7,
            _ => 12,
        };
        let got = (compute_b1(Some(alpha), R), compute_lookahead_k(Some(alpha), R));
        if got != (b1, k) {
            bad.push(format!("alpha={:.2}R got {got:?} want {:?}", f64::from(i) / 100.0, (b1, k)));
        }
    }
    let (fast, time) = within(Duration::from_secs(1), started);
    outcome(
        bad.is_empty() && fast,
        format!("401 alpha values, {} mismatches {:?}; {time}", bad.len(), bad.first()),
    )
}

fn oracle_equivalence() -> Outcome {
    const GRID: [f64; 4] = [500.0, 1500.0, 3500.0, 6000.0];
    let started = Instant::now();
    let mut sessions = 0usize;
    let mut first_bad = None;
    let mut check = |case: OracleCase, kind: PolicyKind| {
        sessions += 1;
        let engine = run_engine(&case, kind);
        let (events, _) = run_oracle(&case);
        if first_bad.is_none() {
            if let Some(d) = compare_logs(&engine.events, &events) {
                first_bad = Some(format!("{kind} {case:?}: {d}"));
            }
        }
    };
    let base = |kind: PolicyKind| OracleCase {
        bitrate_kbps: R,
        tau_s: 1.0,
        segments: vec![],
        watch_s: vec![],
        bins_kbps: vec![],
        startup_segments: 1,
        window_s: 10.0,
        policy: oracle_policy(kind),
        residual_as_waste: true,
    };
    // every playlist of up to three videos with 1..=5 segments, every
    // three-bin trace over the grid, a fixed spread of watch times
    for kind in PolicyKind::ALL {
        for n in 1..=3usize {
            for shape in 0..5usize.pow(n as u32) {
                let segments: Vec<u32> = (0..n).map(|j| (shape / 5usize.pow(j as u32) % 5) as u32 + 1).collect();
                for bins in 0..64usize {
                    let mut case = base(kind);
                    case.segments = segments.clone();
                    case.watch_s = (0..n).map(|j| [2.5, 0.5, 4.0][j]).collect();
                    case.bins_kbps = (0..3).map(|d| GRID[(bins >> (2 * d)) & 3]).collect();
                    check(case, kind);
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20_000 {
        let kind = PolicyKind::ALL[rng.random_range(0..3)];
        let n = rng.random_range(1..=3);
        let mut case = base(kind);
        case.segments = (0..n).map(|_| rng.random_range(1..=5)).collect();
        let watched = rng.random_range(1..=n);
        case.watch_s = (0..watched).map(|_| rng.random_range(1..=12) as f64 * 0.5).collect();
        case.bins_kbps = (0..rng.random_range(1..=6)).map(|_| GRID[rng.random_range(0..4)]).collect();
        case.startup_segments = rng.random_range(1..=2);
        case.window_s = [0.5, 1.5, 3.0, 10.0][rng.random_range(0..4)];
        case.residual_as_waste = rng.random_bool(0.5);
        check(case, kind);
    }
    let (fast, time) = within(Duration::from_secs(10), started);
    match first_bad {
        None => outcome(fast, format!("{sessions} sessions identical within 1e-9 s; {time}")),
        Some(d) => outcome(false, d),
    }
}

fn bundled_traces() -> Vec<ThroughputTrace> {
    (1..=3)
        .map(|i| {
            ThroughputTrace::load(common::data_dir().join(format!("traces/trace{i}.txt")), true)
                .unwrap()
        })
        .collect()
}

/// Conservation over 1,000 random sessions, plus the network-aware buffer
/// cap on the same sessions.
fn randomized_sessions() -> (Outcome, Outcome) {
    let started = Instant::now();
    let traces = bundled_traces();
    let playlist = Playlist::uniform(120, R, 15.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_gap = 0.0f64;
    let mut cap_violations = 0usize;
    let mut first_violation = None;
    for s in 0..1000u64 {
        let (mean, std) = if rng.random_bool(0.5) { (12.0, 6.0) } else { (6.0, 3.0) };
        let user = generate_user_trace(mean, std, 180.0, rng.random());
        let trace = &traces[rng.random_range(0..3)];
        let config = SessionConfig {
            count_residual_buffers_as_waste: s % 2 == 0,
            ..SessionConfig::default()
        };
        let baseline = [PolicyKind::NextOne, PolicyKind::Waterfall][rng.random_range(0..2)];
        for kind in [PolicyKind::NetworkAware, baseline] {
            let out = simulate_session(&playlist, trace, &user, &Policy::from_kind(kind), &config).unwrap();
            for v in &out.metrics.videos {
                let gap = (v.downloaded_s - (v.watched_s + v.waste_s + v.residual_s)).abs();
                worst_gap = worst_gap.max(gap);
            }
            if kind != PolicyKind::NetworkAware {
                continue;
            }
            let mut current = 1;
            for e in &out.events {
                match e.kind {
                    EventKind::Scroll => current = e.video.unwrap() + 1,
                    EventKind::DownloadComplete => {
                        let cap = if e.video == Some(current) { 5.0 } else { 4.0 };
                        if e.buffer_s.unwrap() > cap + 1e-9 {
                            cap_violations += 1;
                            first_violation.get_or_insert(format!("session {s}: {e:?}"));
                        }
                    }
                    _ => {}
                }
            }
        }
    }
    let (fast, time) = within(Duration::from_secs(60), started);
    (
        outcome(
            worst_gap <= 1e-9 && fast,
            format!("1000 sessions x 2 policies, worst |downloaded - watched - waste - residual| = {worst_gap:.3e} s; {time}"),
        ),
        outcome(
            cap_violations == 0,
            format!("{cap_violations} violations {first_violation:?}"),
        ),
    )
}

fn reduction(report: &ComparisonReport, metric: Metric, base: PolicyKind, thru: &str, user: &str) -> Option<f64> {
    let p = report.cell(PolicyKind::NetworkAware, thru, user)?.get(metric);
    let b = report.cell(base, thru, user)?.get(metric);
    relative_reduction(p, b)
}

fn fmt_pct(r: Option<f64>) -> String {
    r.map_or_else(|| "undefined".to_owned(), |p| format!("{p:.1}%"))
}

fn full_scale(report: &ComparisonReport) -> Vec<(String, Outcome)> {
    let users = report.user_traces();
    let baselines = [PolicyKind::NextOne, PolicyKind::Waterfall];
    let mut out = Vec::new();

    let mut waste_ok = true;
    let mut waste = Vec::new();
    for thru in ["trace1", "trace2", "trace3"] {
        for user in &users {
            for b in baselines {
                let r = reduction(report, Metric::Waste, b, thru, user);
                waste_ok &= r.is_some_and(|p| (25.0..=65.0).contains(&p));
                waste.push(format!("{thru}/{user}/{b}={}", fmt_pct(r)));
            }
        }
    }
    out.push((
        "waste reduction within [25%, 65%] vs both baselines on every trace".to_owned(),
        outcome(waste_ok, waste.join(" ")),
    ));

    for metric in [Metric::Startup, Metric::Rebuffer] {
        let mut ok = true;
        let mut parts = Vec::new();
        for thru in ["trace1", "trace2"] {
            for user in &users {
                for b in baselines {
                    let r = reduction(report, metric, b, thru, user);
                    ok &= r.is_some_and(|p| p >= 80.0);
                    parts.push(format!("{thru}/{user}/{b}={}", fmt_pct(r)));
                }
            }
        }
        out.push((
            format!("{} reduction >= 80% on trace1 and trace2", metric.column()),
            outcome(ok, parts.join(" ")),
        ));
    }

    let mut ok = true;
    let mut parts = Vec::new();
    for user in &users {
        for kind in PolicyKind::ALL {
            let d = report.cell(kind, "trace3", user).map_or(0.0, |c| c.startup_s);
            ok &= d > 0.0;
            parts.push(format!("{user}/{kind}={d:.3}s"));
        }
    }
    out.push(("trace3 start-up delay > 0 for every policy".to_owned(), outcome(ok, parts.join(" "))));

    let mut ok = true;
    let mut parts = Vec::new();
    for user in &users {
        for b in baselines {
            let r = reduction(report, Metric::Startup, b, "trace3", user);
            ok &= r.is_some_and(|p| p >= 20.0);
            parts.push(format!("{user}/{b}={}", fmt_pct(r)));
        }
    }
    out.push(("trace3 start-up reduction >= 20% vs both baselines".to_owned(), outcome(ok, parts.join(" "))));
    out
}

fn main() {
    let mut results: Vec<(String, Outcome)> = Vec::new();
    results.push(("threshold tables over alpha in [0, 4R] step 0.01R".into(), threshold_tables()));
    results.push(("event log equals brute-force oracle on small sessions".into(), oracle_equivalence()));
    let (conservation, cap) = randomized_sessions();
    results.push(("conservation of downloaded content".into(), conservation));
    results.push(("network-aware buffer cap (4 segments, current 5)".into(), cap));

    let config = common::data_dir().join("defaults.toml");
    let started = Instant::now();
    let exp = Experiment::load(&config).unwrap();
    let first = run_matrix(&exp).unwrap();
    let (fast, time) = within(Duration::from_secs(120), started);
    let seeds = exp.config.replicates;
    results.push((
        format!("defaults matrix with >= 20 replicate seeds ({seeds})"),
        outcome(seeds >= 20 && fast, format!("{} sessions; {time}", first.sessions.len())),
    ));
    for (name, o) in full_scale(&first.report) {
        results.push((name, o));
    }

    let second = run_matrix(&Experiment::load(&config).unwrap()).unwrap();
    let same = first.report.to_csv() == second.report.to_csv()
        && first.report.sessions_csv() == second.report.sessions_csv();
    results.push((
        "two identical runs give byte-identical CSV".into(),
        outcome(same, format!("{} bytes", first.report.to_csv().len())),
    ));

    let mut failed = 0;
    for (name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!("[{tag}] {name}: {}", o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
