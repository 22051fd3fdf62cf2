//! Experiment configuration and the policy x trace matrix runner.
//!
//! A config is a TOML file; relative paths resolve against the config's own
//! directory. See `data/defaults.toml` for a complete example.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::{
    CellMetrics, ComparisonReport, InputRecord, ReportFormat, ReportMeta, SessionRow, OQ_FORM,
};
use crate::model::{Playlist, QoeWeights, SessionConfig};
use crate::policy::{NetworkAware, Policy, PolicyKind, ThresholdTable};
use crate::sim::{simulate_session, EventRecord};
use crate::traces::{generate_user_trace, ThroughputTrace, UserTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaylistParams {
    /// Number of videos N. Must be at least the longest user trace.
    pub videos: usize,
    pub duration_s: f64,
    pub bitrate_kbps: f64,
    pub segment_duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionParams {
    pub startup_threshold_segments: u32,
    pub throughput_window_s: f64,
    pub count_residual_buffers_as_waste: bool,
    pub qoe_weights: QoeWeights,
}

impl Default for SessionParams {
    fn default() -> Self {
        let d = SessionConfig::default();
        Self {
            startup_threshold_segments: d.startup_threshold_segments,
            throughput_window_s: d.throughput_window_s,
            count_residual_buffers_as_waste: d.count_residual_buffers_as_waste,
            qoe_weights: d.qoe_weights,
        }
    }
}

/// Optional overrides of the network-aware threshold tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkAwareParams {
    pub b1_multipliers: Vec<f64>,
    pub b1_values: Vec<u32>,
    pub k_multipliers: Vec<f64>,
    pub k_values: Vec<u32>,
}

impl Default for NetworkAwareParams {
    fn default() -> Self {
        let b1 = ThresholdTable::default_b1();
        let k = ThresholdTable::default_k();
        Self {
            b1_multipliers: b1.multipliers,
            b1_values: b1.values,
            k_multipliers: k.multipliers,
            k_values: k.values,
        }
    }
}

impl NetworkAwareParams {
    pub fn build(&self) -> std::result::Result<NetworkAware, String> {
        Ok(NetworkAware {
            b1_table: ThresholdTable::new(self.b1_multipliers.clone(), self.b1_values.clone())
                .map_err(|e| format!("b1 table: {e}"))?,
            k_table: ThresholdTable::new(self.k_multipliers.clone(), self.k_values.clone())
                .map_err(|e| format!("k table: {e}"))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThroughputTraceSpec {
    pub name: String,
    pub path: PathBuf,
    #[serde(default = "default_true")]
    pub wrap: bool,
    #[serde(default)]
    pub note: Option<String>,
}

/// A user trace read from a file, or generated from Gaussian parameters
/// once per replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserTraceSpec {
    pub name: String,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub mean_s: Option<f64>,
    #[serde(default)]
    pub std_s: Option<f64>,
    #[serde(default)]
    pub total_s: Option<f64>,
}

fn default_true() -> bool {
    true
}

fn default_replicates() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub rng_seed: u64,
    /// Sessions per generated user trace, each with its own derived seed.
    #[serde(default = "default_replicates")]
    pub replicates: u32,
    pub policies: Vec<PolicyKind>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub format: ReportFormat,
    pub playlist: PlaylistParams,
    #[serde(default)]
    pub session: SessionParams,
    #[serde(default)]
    pub network_aware: NetworkAwareParams,
    pub throughput_traces: Vec<ThroughputTraceSpec>,
    pub user_traces: Vec<UserTraceSpec>,
}

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigParse {
            path: origin.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn session_config(&self, seed: u64) -> SessionConfig {
        SessionConfig {
            startup_threshold_segments: self.session.startup_threshold_segments,
            throughput_window_s: self.session.throughput_window_s,
            qoe_weights: self.session.qoe_weights,
            rng_seed: seed,
            count_residual_buffers_as_waste: self.session.count_residual_buffers_as_waste,
        }
    }

    pub fn build_playlist(&self) -> Result<Playlist> {
        let p = &self.playlist;
        Playlist::uniform(p.videos, p.bitrate_kbps, p.duration_s, p.segment_duration_s)
    }
}

/// A parsed config with every referenced file loaded.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub config_text: String,
    pub config_path: PathBuf,
    pub playlist: Playlist,
    pub network_aware: NetworkAware,
    pub throughput: Vec<(ThroughputTraceSpec, ThroughputTrace, String)>,
    pub users: Vec<(UserTraceSpec, UserSource)>,
}

#[derive(Debug, Clone)]
pub enum UserSource {
    File { trace: UserTrace, sha256: String },
    Gaussian { mean_s: f64, std_s: f64, total_s: f64 },
}

/// Derived facts printed by `validate`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationSummary {
    pub videos: usize,
    pub segments_per_video: u32,
    pub throughput: Vec<(String, f64, f64)>,
    pub users: Vec<(String, String)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl Experiment {
    /// Loads a config and everything it references, failing on the first
    /// problem.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_collecting(path).map_err(|mut errs| errs.remove(0))
    }

    /// Loads a config, collecting every violation instead of stopping at the
    /// first one.
    pub fn load_collecting(path: impl AsRef<Path>) -> std::result::Result<Self, Vec<Error>> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| vec![Error::io(path, e)])?;
        let config = ExperimentConfig::parse(&text, path).map_err(|e| vec![e])?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut errors = Vec::new();
        let invalid = |msg: String| Error::InvalidConfig(msg);

        if config.policies.is_empty() {
            errors.push(invalid("at least one policy is required".into()));
        }
        if config.replicates == 0 {
            errors.push(invalid("replicates must be at least 1".into()));
        }
        if config.throughput_traces.is_empty() {
            errors.push(invalid("at least one throughput trace is required".into()));
        }
        if config.user_traces.is_empty() {
            errors.push(invalid("at least one user trace is required".into()));
        }
        check_unique(
            config.throughput_traces.iter().map(|t| t.name.as_str()),
            "throughput trace",
            &mut errors,
        );
        check_unique(
            config.user_traces.iter().map(|t| t.name.as_str()),
            "user trace",
            &mut errors,
        );

        let playlist = config.build_playlist().map_err(|e| errors.push(e)).ok();
        if let Err(e) = config.session_config(config.rng_seed).validate() {
            errors.push(e);
        }
        if let Some(first) = playlist.as_ref().and_then(|p| p.get(0)) {
            let m = first.segment_count();
            if config.session.startup_threshold_segments > m {
                errors.push(invalid(format!(
                    "startup threshold {} exceeds the {m} segments of a video",
                    config.session.startup_threshold_segments
                )));
            }
        }
        let network_aware = config
            .network_aware
            .build()
            .map_err(|e| errors.push(invalid(format!("network_aware: {e}"))))
            .ok();

        let mut throughput = Vec::new();
        for spec in &config.throughput_traces {
            let full = resolve(base, &spec.path);
            match fs::read(&full) {
                Err(e) => errors.push(Error::io(&full, e)),
                Ok(bytes) => {
                    let text = String::from_utf8_lossy(&bytes);
                    match ThroughputTrace::parse(&text, &full.display().to_string(), spec.wrap) {
                        Ok(tr) => throughput.push((spec.clone(), tr, sha256_hex(&bytes))),
                        Err(e) => errors.push(e),
                    }
                }
            }
        }

        let mut users = Vec::new();
        for spec in &config.user_traces {
            match (&spec.path, spec.mean_s, spec.std_s, spec.total_s) {
                (Some(p), None, None, None) => {
                    let full = resolve(base, p);
                    match fs::read(&full) {
                        Err(e) => errors.push(Error::io(&full, e)),
                        Ok(bytes) => {
                            let text = String::from_utf8_lossy(&bytes);
                            match UserTrace::parse(&text, &full.display().to_string()) {
                                Ok(trace) => {
                                    if let Some(pl) = &playlist {
                                        if trace.len() > pl.len() {
                                            errors.push(Error::UserTraceTooLong {
                                                trace_len: trace.len(),
                                                playlist_len: pl.len(),
                                            });
                                        }
                                    }
                                    users.push((
                                        spec.clone(),
                                        UserSource::File {
                                            trace,
                                            sha256: sha256_hex(&bytes),
                                        },
                                    ))
                                }
                                Err(e) => errors.push(e),
                            }
                        }
                    }
                }
                (None, Some(mean_s), Some(std_s), Some(total_s)) => {
                    let ok = mean_s.is_finite()
                        && mean_s > 0.0
                        && std_s.is_finite()
                        && std_s >= 0.0
                        && total_s.is_finite()
                        && total_s > 0.0;
                    if ok {
                        users.push((
                            spec.clone(),
                            UserSource::Gaussian {
                                mean_s,
                                std_s,
                                total_s,
                            },
                        ));
                    } else {
                        errors.push(invalid(format!(
                            "user trace {}: need mean_s > 0, std_s >= 0, total_s > 0",
                            spec.name
                        )));
                    }
                }
                _ => errors.push(invalid(format!(
                    "user trace {}: give either `path` or all of `mean_s`, `std_s`, `total_s`",
                    spec.name
                ))),
            }
        }

        if !errors.is_empty() {
            return Err(errors);
        }
        Ok(Self {
            config,
            config_text: text,
            config_path: path.to_path_buf(),
            playlist: playlist.expect("checked"),
            network_aware: network_aware.expect("checked"),
            throughput,
            users,
        })
    }

    pub fn summary(&self) -> ValidationSummary {
        ValidationSummary {
            videos: self.playlist.len(),
            segments_per_video: self.playlist.videos()[0].segment_count(),
            throughput: self
                .throughput
                .iter()
                .map(|(s, t, _)| (s.name.clone(), t.duration_s(), t.mean_kbps()))
                .collect(),
            users: self
                .users
                .iter()
                .map(|(s, src)| {
                    let desc = match src {
                        UserSource::File { trace, .. } => format!(
                            "{} videos, {:.1}s intended watch time",
                            trace.len(),
                            trace.total_s()
                        ),
                        UserSource::Gaussian {
                            mean_s,
                            std_s,
                            total_s,
                        } => format!(
                            "gaussian mean={mean_s} std={std_s}, at least {total_s}s per session"
                        ),
                    };
                    (s.name.clone(), desc)
                })
                .collect(),
        }
    }

    /// Replicate seeds for a user trace. Depends only on the base seed, the
    /// trace name, and the replicate number, so a cell's result does not
    /// depend on what else is in the matrix.
    pub fn replicate_seed(&self, user_name: &str, replicate: u32) -> u64 {
        derive_seed(self.config.rng_seed, user_name, replicate)
    }

    fn user_trace_for(&self, idx: usize, replicate: u32) -> (UserTrace, u64) {
        let (spec, source) = &self.users[idx];
        let seed = self.replicate_seed(&spec.name, replicate);
        match source {
            UserSource::File { trace, .. } => (trace.clone(), seed),
            UserSource::Gaussian {
                mean_s,
                std_s,
                total_s,
            } => (generate_user_trace(*mean_s, *std_s, *total_s, seed), seed),
        }
    }

    fn replicates_for(&self, idx: usize) -> u32 {
        match self.users[idx].1 {
            UserSource::File { .. } => 1,
            UserSource::Gaussian { .. } => self.config.replicates,
        }
    }

    fn policy(&self, kind: PolicyKind) -> Policy {
        match kind {
            PolicyKind::NetworkAware => Policy::NetworkAware(self.network_aware.clone()),
            other => Policy::from_kind(other),
        }
    }

    pub fn meta(&self) -> ReportMeta {
        ReportMeta {
            tool: format!("scrollfetch {}", env!("CARGO_PKG_VERSION")),
            config_sha256: sha256_hex(self.config_text.as_bytes()),
            rng_seed: self.config.rng_seed,
            replicates: self.config.replicates,
            throughput_traces: self
                .throughput
                .iter()
                .map(|(s, _, hash)| InputRecord {
                    name: s.name.clone(),
                    source: s.path.display().to_string(),
                    sha256: hash.clone(),
                    note: s.note.clone(),
                })
                .collect(),
            user_traces: self
                .users
                .iter()
                .map(|(s, src)| match src {
                    UserSource::File { sha256, .. } => InputRecord {
                        name: s.name.clone(),
                        source: s.path.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
                        sha256: sha256.clone(),
                        note: None,
                    },
                    UserSource::Gaussian {
                        mean_s,
                        std_s,
                        total_s,
                    } => InputRecord {
                        name: s.name.clone(),
                        source: format!(
                            "generated: gaussian mean={mean_s} std={std_s} total={total_s}, nonpositive draws redrawn, chacha8 seeded per replicate"
                        ),
                        sha256: String::new(),
                        note: None,
                    },
                })
                .collect(),
            oq_form: OQ_FORM.to_owned(),
            config: serde_json::to_value(&self.config).unwrap_or(serde_json::Value::Null),
        }
    }

    /// Every (policy, throughput trace, user trace, replicate) session in
    /// report order.
    pub fn cells(&self) -> Vec<CellSpec> {
        let mut out = Vec::new();
        for &policy in &self.config.policies {
            for t in 0..self.throughput.len() {
                for u in 0..self.users.len() {
                    for r in 0..self.replicates_for(u) {
                        out.push(CellSpec {
                            policy,
                            thru: t,
                            user: u,
                            replicate: r,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn run_cell(&self, cell: &CellSpec) -> Result<SessionResult> {
        let (user, seed) = self.user_trace_for(cell.user, cell.replicate);
        let (tspec, trace, _) = &self.throughput[cell.thru];
        let uspec = &self.users[cell.user].0;
        let policy = self.policy(cell.policy);
        let cfg = self.config.session_config(seed);
        let out = simulate_session(&self.playlist, trace, &user, &policy, &cfg)?;
        Ok(SessionResult {
            row: SessionRow {
                policy: cell.policy,
                thru_trace: tspec.name.clone(),
                user_trace: uspec.name.clone(),
                replicate: cell.replicate,
                seed,
                metrics: CellMetrics::from_session(&out.metrics),
            },
            events: out.events,
        })
    }
}

fn check_unique<'a>(names: impl Iterator<Item = &'a str>, what: &str, errors: &mut Vec<Error>) {
    let mut seen: Vec<&str> = Vec::new();
    for n in names {
        if n.is_empty() || n.contains([',', '/', '\\']) {
            errors.push(Error::InvalidConfig(format!(
                "{what} name {n:?} must be non-empty without ',' or path separators"
            )));
        }
        if seen.contains(&n) {
            errors.push(Error::InvalidConfig(format!("duplicate {what} name {n:?}")));
        }
        seen.push(n);
    }
}

/// SplitMix64 finaliser over the base seed, an FNV-1a hash of the name,
/// and the replicate number.
pub fn derive_seed(base: u64, name: &str, replicate: u32) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = base ^ h.rotate_left(17) ^ (u64::from(replicate)).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellSpec {
    pub policy: PolicyKind,
    pub thru: usize,
    pub user: usize,
    pub replicate: u32,
}

#[derive(Debug, Clone)]
pub struct SessionResult {
    pub row: SessionRow,
    pub events: Vec<EventRecord>,
}

impl SessionResult {
    pub fn log_name(&self) -> String {
        format!(
            "{}__{}__{}__r{:03}.jsonl",
            self.row.policy, self.row.thru_trace, self.row.user_trace, self.row.replicate
        )
    }
}

/// Results of a full matrix run.
#[derive(Debug, Clone)]
pub struct MatrixOutput {
    pub report: ComparisonReport,
    pub sessions: Vec<SessionResult>,
}

/// Runs every cell in parallel; results are merged in cell order.
pub fn run_matrix(experiment: &Experiment) -> Result<MatrixOutput> {
    let cells = experiment.cells();
    let sessions = cells
        .par_iter()
        .map(|c| experiment.run_cell(c))
        .collect::<Result<Vec<_>>>()?;
    let rows = sessions.iter().map(|s| s.row.clone()).collect();
    let report = ComparisonReport::from_sessions(experiment.meta(), rows);
    Ok(MatrixOutput { report, sessions })
}

/// Writes the report, a copy of the config, and optionally one event log
/// per session under `dir`.
pub fn write_outputs(
    experiment: &Experiment,
    output: &MatrixOutput,
    dir: &Path,
    format: ReportFormat,
    event_logs: bool,
) -> Result<Vec<PathBuf>> {
    let mut written = crate::metrics::emit_report(&output.report, dir, format)?;
    let copy = dir.join("config.toml");
    fs::write(&copy, &experiment.config_text).map_err(|e| Error::io(&copy, e))?;
    written.push(copy);
    if event_logs {
        let logs = dir.join("logs");
        fs::create_dir_all(&logs).map_err(|e| Error::io(&logs, e))?;
        for s in &output.sessions {
            let path = logs.join(s.log_name());
            crate::sim::write_event_log(&path, &s.events)?;
            written.push(path);
        }
    }
    Ok(written)
}
