//! Session aggregation, the overall-quality score, and comparison reports.
//!
//! CSV files write every number with nine decimal places. JSON files use
//! the shortest representation that parses back to the same `f64`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{QoeWeights, SessionMetrics, SessionTotals, VideoMetrics};
use crate::policy::PolicyKind;

/// Header of the long-format comparison CSV.
pub const CSV_HEADER: &str = "policy,thru_trace,user_trace,waste_s,startup_s,rebuffer_s,oq,waste_mbit";

/// Description of the quality score written into report metadata.
pub const OQ_FORM: &str = "artifact-defined linear score: w_R*sum(watched_s*R/R_max) - w_I*rebuffer_s - w_D*startup_s - w_W*waste_s";

/// Sums per-video records into session totals.
pub fn aggregate(per_video: &[VideoMetrics]) -> SessionTotals {
    let mut t = SessionTotals::default();
    let mut waste_kbit = 0.0;
    for v in per_video {
        t.waste_s += v.waste_s;
        t.startup_delay_s += v.startup_delay_s;
        t.rebuffer_s += v.rebuffer_s;
        t.watched_s += v.watched_s;
        t.downloaded_s += v.downloaded_s;
        t.residual_s += v.residual_s;
        waste_kbit += v.waste_s * v.bitrate_kbps + v.aborted_kbit;
    }
    t.waste_mbit = waste_kbit / 1000.0;
    t
}

/// `w_R * sum(watched * R / R_max) - w_I * I - w_D * D - w_W * W`.
///
/// The bitrate term is normalised by the highest bitrate among the
/// session's videos so every term is in seconds.
pub fn overall_quality(metrics: &SessionMetrics, weights: &QoeWeights) -> f64 {
    let max_bitrate = metrics
        .videos
        .iter()
        .map(|v| v.bitrate_kbps)
        .fold(0.0, f64::max);
    let quality: f64 = if max_bitrate > 0.0 {
        metrics
            .videos
            .iter()
            .map(|v| v.watched_s * v.bitrate_kbps / max_bitrate)
            .sum()
    } else {
        0.0
    };
    let t = &metrics.totals;
    weights.bitrate * quality
        - weights.rebuffer * t.rebuffer_s
        - weights.startup * t.startup_delay_s
        - weights.waste * t.waste_s
}

pub(crate) fn session_metrics(videos: Vec<VideoMetrics>, weights: &QoeWeights) -> SessionMetrics {
    let totals = aggregate(&videos);
    let mut metrics = SessionMetrics {
        videos,
        totals,
        overall_quality: 0.0,
    };
    metrics.overall_quality = overall_quality(&metrics, weights);
    metrics
}

/// `100 * (baseline - proposed) / baseline`, or `None` when the baseline is
/// zero.
pub fn relative_reduction(proposed: f64, baseline: f64) -> Option<f64> {
    (baseline > 0.0).then(|| 100.0 * (baseline - proposed) / baseline)
}

/// The five reported numbers of one cell, averaged over replicates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CellMetrics {
    pub waste_s: f64,
    pub startup_s: f64,
    pub rebuffer_s: f64,
    pub oq: f64,
    pub waste_mbit: f64,
    pub sessions: usize,
}

impl CellMetrics {
    pub fn from_session(m: &SessionMetrics) -> Self {
        Self {
            waste_s: m.totals.waste_s,
            startup_s: m.totals.startup_delay_s,
            rebuffer_s: m.totals.rebuffer_s,
            oq: m.overall_quality,
            waste_mbit: m.totals.waste_mbit,
            sessions: 1,
        }
    }

    /// Arithmetic mean over sessions, accumulated in the given order.
    pub fn mean<'a>(cells: impl IntoIterator<Item = &'a CellMetrics>) -> Self {
        let mut acc = CellMetrics::default();
        let mut n = 0usize;
        for c in cells {
            acc.waste_s += c.waste_s;
            acc.startup_s += c.startup_s;
            acc.rebuffer_s += c.rebuffer_s;
            acc.oq += c.oq;
            acc.waste_mbit += c.waste_mbit;
            n += c.sessions;
        }
        if n > 0 {
            let k = n as f64;
            acc.waste_s /= k;
            acc.startup_s /= k;
            acc.rebuffer_s /= k;
            acc.oq /= k;
            acc.waste_mbit /= k;
        }
        acc.sessions = n;
        acc
    }

    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Waste => self.waste_s,
            Metric::Startup => self.startup_s,
            Metric::Rebuffer => self.rebuffer_s,
            Metric::Oq => self.oq,
            Metric::WasteMbit => self.waste_mbit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Waste,
    Startup,
    Rebuffer,
    Oq,
    WasteMbit,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Waste,
        Metric::Startup,
        Metric::Rebuffer,
        Metric::Oq,
        Metric::WasteMbit,
    ];

    pub fn column(self) -> &'static str {
        match self {
            Metric::Waste => "waste_s",
            Metric::Startup => "startup_s",
            Metric::Rebuffer => "rebuffer_s",
            Metric::Oq => "oq",
            Metric::WasteMbit => "waste_mbit",
        }
    }
}

/// One (policy, throughput trace, user trace) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub policy: PolicyKind,
    pub thru_trace: String,
    pub user_trace: String,
    pub metrics: CellMetrics,
}

/// One simulated session, before averaging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRow {
    pub policy: PolicyKind,
    pub thru_trace: String,
    pub user_trace: String,
    pub replicate: u32,
    pub seed: u64,
    pub metrics: CellMetrics,
}

/// Identifies an input file by name and content hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecord {
    pub name: String,
    pub source: String,
    pub sha256: String,
    #[serde(default)]
    pub note: Option<String>,
}

/// Provenance written next to every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub tool: String,
    pub config_sha256: String,
    pub rng_seed: u64,
    pub replicates: u32,
    pub throughput_traces: Vec<InputRecord>,
    pub user_traces: Vec<InputRecord>,
    pub oq_form: String,
    pub config: serde_json::Value,
}

/// Reduction of the network-aware policy against one baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionRow {
    pub thru_trace: String,
    pub user_trace: String,
    pub baseline: PolicyKind,
    pub metric: Metric,
    pub proposed: f64,
    pub baseline_value: f64,
    /// `None` when the baseline value is zero.
    pub percent: Option<f64>,
}

/// Results of a policy x throughput-trace x user-trace matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub meta: ReportMeta,
    pub cells: Vec<ReportCell>,
    pub sessions: Vec<SessionRow>,
}

impl ComparisonReport {
    /// Averages per-session rows into cells, keeping first-seen order.
    pub fn from_sessions(meta: ReportMeta, sessions: Vec<SessionRow>) -> Self {
        let mut order: Vec<(PolicyKind, String, String)> = Vec::new();
        let mut groups: BTreeMap<(PolicyKind, String, String), Vec<CellMetrics>> = BTreeMap::new();
        for row in &sessions {
            let key = (row.policy, row.thru_trace.clone(), row.user_trace.clone());
            if !groups.contains_key(&key) {
                order.push(key.clone());
            }
            groups.entry(key).or_default().push(row.metrics);
        }
        let cells = order
            .into_iter()
            .map(|key| {
                let metrics = CellMetrics::mean(&groups[&key]);
                ReportCell {
                    policy: key.0,
                    thru_trace: key.1,
                    user_trace: key.2,
                    metrics,
                }
            })
            .collect();
        Self {
            meta,
            cells,
            sessions,
        }
    }

    pub fn cell(&self, policy: PolicyKind, thru: &str, user: &str) -> Option<&CellMetrics> {
        self.cells
            .iter()
            .find(|c| c.policy == policy && c.thru_trace == thru && c.user_trace == user)
            .map(|c| &c.metrics)
    }

    fn distinct<'a>(&'a self, f: impl Fn(&'a ReportCell) -> &'a str) -> Vec<&'a str> {
        let mut out: Vec<&str> = Vec::new();
        for c in &self.cells {
            let name = f(c);
            if !out.contains(&name) {
                out.push(name);
            }
        }
        out
    }

    pub fn thru_traces(&self) -> Vec<&str> {
        self.distinct(|c| &c.thru_trace)
    }

    pub fn user_traces(&self) -> Vec<&str> {
        self.distinct(|c| &c.user_trace)
    }

    pub fn policies(&self) -> Vec<PolicyKind> {
        let mut out = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.policy) {
                out.push(c.policy);
            }
        }
        out
    }

    /// Network-aware versus each baseline, per trace pair and metric.
    pub fn reductions(&self) -> Vec<ReductionRow> {
        let mut rows = Vec::new();
        for thru in self.thru_traces() {
            for user in self.user_traces() {
                let Some(proposed) = self.cell(PolicyKind::NetworkAware, thru, user) else {
                    continue;
                };
                for baseline in [PolicyKind::NextOne, PolicyKind::Waterfall] {
                    let Some(base) = self.cell(baseline, thru, user) else {
                        continue;
                    };
                    for metric in [Metric::Waste, Metric::Startup, Metric::Rebuffer, Metric::WasteMbit] {
                        let (p, b) = (proposed.get(metric), base.get(metric));
                        rows.push(ReductionRow {
                            thru_trace: thru.to_owned(),
                            user_trace: user.to_owned(),
                            baseline,
                            metric,
                            proposed: p,
                            baseline_value: b,
                            percent: relative_reduction(p, b),
                        });
                    }
                }
            }
        }
        rows
    }

    /// Long-format CSV: one row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            let m = &c.metrics;
            let _ = writeln!(
                out,
                "{},{},{},{:.9},{:.9},{:.9},{:.9},{:.9}",
                c.policy, c.thru_trace, c.user_trace, m.waste_s, m.startup_s, m.rebuffer_s, m.oq, m.waste_mbit
            );
        }
        out
    }

    /// One row per simulated session.
    pub fn sessions_csv(&self) -> String {
        let mut out = String::from(
            "policy,thru_trace,user_trace,replicate,seed,waste_s,startup_s,rebuffer_s,oq,waste_mbit\n",
        );
        for r in &self.sessions {
            let m = &r.metrics;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.9},{:.9},{:.9},{:.9},{:.9}",
                r.policy,
                r.thru_trace,
                r.user_trace,
                r.replicate,
                r.seed,
                m.waste_s,
                m.startup_s,
                m.rebuffer_s,
                m.oq,
                m.waste_mbit
            );
        }
        out
    }

    /// A policies x throughput-traces table for one metric and user trace.
    pub fn metric_table(&self, metric: Metric, user: &str) -> String {
        let thrus = self.thru_traces();
        let mut out = String::from("policy");
        for t in &thrus {
            out.push(',');
            out.push_str(t);
        }
        out.push('\n');
        for policy in self.policies() {
            out.push_str(policy.as_str());
            for t in &thrus {
                match self.cell(policy, t, user) {
                    Some(m) => {
                        let _ = write!(out, ",{:.9}", m.get(metric));
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn reductions_csv(&self) -> String {
        let mut out = String::from(
            "thru_trace,user_trace,baseline,metric,proposed,baseline_value,reduction_pct\n",
        );
        for r in self.reductions() {
            let pct = r
                .percent
                .map_or_else(|| "undefined".to_owned(), |p| format!("{p:.9}"));
            let _ = writeln!(
                out,
                "{},{},{},{},{:.9},{:.9},{}",
                r.thru_trace,
                r.user_trace,
                r.baseline,
                r.metric.column(),
                r.proposed,
                r.baseline_value,
                pct
            );
        }
        out
    }

    /// `{meta, policies: {policy: {thru_trace: {user_trace: metrics}}}, ...}`.
    pub fn to_json(&self) -> Result<String> {
        let mut nested: BTreeMap<String, BTreeMap<String, BTreeMap<String, CellMetrics>>> =
            BTreeMap::new();
        for c in &self.cells {
            nested
                .entry(c.policy.to_string())
                .or_default()
                .entry(c.thru_trace.clone())
                .or_default()
                .insert(c.user_trace.clone(), c.metrics);
        }
        let doc = JsonReport {
            meta: self.meta.clone(),
            policies: nested,
            cells: self.cells.clone(),
            sessions: self.sessions.clone(),
            reductions: self.reductions(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: JsonReport = serde_json::from_str(text)?;
        Ok(Self {
            meta: doc.meta,
            cells: doc.cells,
            sessions: doc.sessions,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct JsonReport {
    meta: ReportMeta,
    policies: BTreeMap<String, BTreeMap<String, BTreeMap<String, CellMetrics>>>,
    cells: Vec<ReportCell>,
    sessions: Vec<SessionRow>,
    reductions: Vec<ReductionRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

/// Writes the report into `dir` and returns the paths written.
///
/// CSV: `report.csv`, `sessions.csv`, `reductions.csv`, one
/// `tables/<metric>__<user_trace>.csv` per metric and user trace, and
/// `meta.json`. JSON: `report.json`.
pub fn emit_report(report: &ComparisonReport, dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |path: PathBuf, body: String| -> Result<()> {
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    };
    match format {
        ReportFormat::Csv => {
            put(dir.join("report.csv"), report.to_csv())?;
            put(dir.join("sessions.csv"), report.sessions_csv())?;
            put(dir.join("reductions.csv"), report.reductions_csv())?;
            let tables = dir.join("tables");
            fs::create_dir_all(&tables).map_err(|e| Error::io(&tables, e))?;
            for user in report.user_traces() {
                for metric in Metric::ALL {
                    put(
                        tables.join(format!("{}__{}.csv", metric.column(), user)),
                        report.metric_table(metric, user),
                    )?;
                }
            }
            put(
                dir.join("meta.json"),
                serde_json::to_string_pretty(&report.meta)?,
            )?;
        }
        ReportFormat::Json => put(dir.join("report.json"), report.to_json()?)?,
    }
    Ok(written)
}
