#![allow(dead_code)]

pub mod oracle;

use scrollfetch::model::{Playlist, SessionConfig, VideoSpec};
use scrollfetch::policy::{Policy, PolicyKind};
use scrollfetch::sim::{simulate_session, SessionOutput};
use scrollfetch::traces::{ThroughputTrace, UserTrace};

use oracle::{OracleCase, OraclePolicy};

pub fn oracle_policy(kind: PolicyKind) -> OraclePolicy {
    match kind {
        PolicyKind::NetworkAware => OraclePolicy::NetworkAware,
        PolicyKind::NextOne => OraclePolicy::InOrder(1),
        PolicyKind::Waterfall => OraclePolicy::InOrder(2),
    }
}

/// Runs the engine on the same inputs as an oracle case.
pub fn run_engine(case: &OracleCase, kind: PolicyKind) -> SessionOutput {
    let videos = case
        .segments
        .iter()
        .enumerate()
        .map(|(i, &m)| VideoSpec::new(i as u32 + 1, case.bitrate_kbps, m as f64 * case.tau_s, case.tau_s))
        .collect();
    let playlist = Playlist::new(videos).unwrap();
    let trace = ThroughputTrace::from_per_second(&case.bins_kbps, true).unwrap();
    let user = UserTrace::new(case.watch_s.clone()).unwrap();
    let config = SessionConfig {
        startup_threshold_segments: case.startup_segments,
        throughput_window_s: case.window_s,
        count_residual_buffers_as_waste: case.residual_as_waste,
        ..SessionConfig::default()
    };
    simulate_session(&playlist, &trace, &user, &Policy::from_kind(kind), &config).unwrap()
}

/// Bundled data directory of the core crate.
pub fn data_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}
