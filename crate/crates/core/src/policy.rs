//! Prefetch decision logic.
//!
//! Every policy is a pure function of a [`PolicyView`] snapshot. The engine
//! asks for a decision whenever the downloader is free.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::TIME_EPSILON;

/// Measured throughput within this many kbps of a breakpoint counts as
/// being on it. Samples are quotients of floating-point times, so a trace
/// that sits exactly on a breakpoint would otherwise land on either side.
pub const BREAKPOINT_TOLERANCE_KBPS: f64 = 1e-6;

/// Buffer state of one playlist entry as seen by a policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateVideo {
    /// 0-based playlist index.
    pub index: usize,
    pub buffered_s: f64,
    pub downloaded_segments: u32,
    pub segment_count: u32,
    pub segment_duration_s: f64,
}

impl CandidateVideo {
    pub fn is_complete(&self) -> bool {
        self.downloaded_segments >= self.segment_count
    }

    fn next_segment(&self) -> PrefetchDecision {
        PrefetchDecision::Download {
            video_index: self.index,
            segment_index: self.downloaded_segments,
        }
    }
}

/// Read-only snapshot handed to a policy.
///
/// `videos[0]` is the video being watched; the rest are the upcoming
/// playlist entries in order, up to the end of the playlist.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyView {
    pub videos: Vec<CandidateVideo>,
    pub current_bitrate_kbps: f64,
    /// Mean measured throughput, `None` before the first measurement.
    pub alpha_kbps: Option<f64>,
    /// True while the current video is playing, so its buffer is shrinking.
    /// A draining buffer sitting exactly on a threshold counts as below it.
    pub current_draining: bool,
}

impl PolicyView {
    pub fn current(&self) -> &CandidateVideo {
        &self.videos[0]
    }

    pub fn current_index(&self) -> usize {
        self.videos[0].index
    }
}

/// What to fetch next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrefetchDecision {
    /// Fetch `segment_index` of the video at 0-based `video_index`.
    Download {
        video_index: usize,
        segment_index: u32,
    },
    Idle,
}

/// A step function of throughput relative to the current bitrate.
///
/// `values[j]` applies when `alpha <= multipliers[j] * bitrate` and no
/// earlier row matched; the last value applies otherwise. A missing
/// measurement selects `values[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub multipliers: Vec<f64>,
    pub values: Vec<u32>,
}

impl ThresholdTable {
    pub fn new(multipliers: Vec<f64>, values: Vec<u32>) -> Result<Self, String> {
        if values.len() != multipliers.len() + 1 {
            return Err(format!(
                "threshold table needs {} values for {} breakpoints, got {}",
                multipliers.len() + 1,
                multipliers.len(),
                values.len()
            ));
        }
        if multipliers.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
            return Err("breakpoints must be strictly increasing".into());
        }
        if multipliers.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err("breakpoints must be positive".into());
        }
        Ok(Self {
            multipliers,
            values,
        })
    }

    /// Buffer threshold table: 4 / 3 / 2 segments with breakpoints at
    /// 1.5R and 2.5R.
    pub fn default_b1() -> Self {
        Self {
            multipliers: vec![1.5, 2.5],
            values: vec![4, 3, 2],
        }
    }

    /// Lookahead table: 7 / 4 / 7 / 12 videos with breakpoints at 1.5R, 2R,
    /// and 2.5R. Not monotone in throughput.
    pub fn default_k() -> Self {
        Self {
            multipliers: vec![1.5, 2.0, 2.5],
            values: vec![7, 4, 7, 12],
        }
    }

    pub fn lookup(&self, alpha_kbps: Option<f64>, bitrate_kbps: f64) -> u32 {
        let Some(alpha) = alpha_kbps else {
            return self.values[0];
        };
        self.multipliers
            .iter()
            .position(|m| alpha <= m * bitrate_kbps + BREAKPOINT_TOLERANCE_KBPS)
            .map_or(*self.values.last().expect("non-empty"), |j| self.values[j])
    }

    pub fn max_value(&self) -> u32 {
        self.values.iter().copied().max().unwrap_or(0)
    }
}

/// Buffer threshold B1 in segments for the default table.
pub fn compute_b1(alpha_kbps: Option<f64>, bitrate_kbps: f64) -> u32 {
    ThresholdTable::default_b1().lookup(alpha_kbps, bitrate_kbps)
}

/// Lookahead depth K in videos for the default table.
pub fn compute_lookahead_k(alpha_kbps: Option<f64>, bitrate_kbps: f64) -> u32 {
    ThresholdTable::default_k().lookup(alpha_kbps, bitrate_kbps)
}

/// Interface the simulation engine drives.
pub trait PrefetchPolicy {
    fn name(&self) -> &'static str;

    fn decide(&self, view: &PolicyView) -> PrefetchDecision;

    /// After an `Idle` decision: the current-video buffer level at which
    /// the decision may change while it drains. `None` if draining alone
    /// cannot change it.
    fn rearm_buffer_s(&self, _view: &PolicyView) -> Option<f64> {
        None
    }
}

/// Network-aware prefetching: keep roughly `B1` segments of the current
/// video buffered, otherwise top up the first of the next `K` videos that is
/// below `B1`. Both thresholds follow the measured throughput.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkAware {
    pub b1_table: ThresholdTable,
    pub k_table: ThresholdTable,
}

impl Default for NetworkAware {
    fn default() -> Self {
        Self {
            b1_table: ThresholdTable::default_b1(),
            k_table: ThresholdTable::default_k(),
        }
    }
}

fn below_threshold(buffered_s: f64, threshold_s: f64, draining: bool) -> bool {
    if draining {
        buffered_s <= threshold_s + TIME_EPSILON
    } else {
        buffered_s < threshold_s - TIME_EPSILON
    }
}

impl NetworkAware {
    fn thresholds(&self, view: &PolicyView) -> (u32, u32) {
        (
            self.b1_table.lookup(view.alpha_kbps, view.current_bitrate_kbps),
            self.k_table.lookup(view.alpha_kbps, view.current_bitrate_kbps),
        )
    }
}

impl PrefetchPolicy for NetworkAware {
    fn name(&self) -> &'static str {
        PolicyKind::NetworkAware.as_str()
    }

    fn decide(&self, view: &PolicyView) -> PrefetchDecision {
        let (b1, k) = self.thresholds(view);
        let cur = view.current();
        let cur_threshold = b1 as f64 * cur.segment_duration_s;
        if !cur.is_complete() && below_threshold(cur.buffered_s, cur_threshold, view.current_draining)
        {
            return cur.next_segment();
        }
        // The k = 0 pass of the scan would re-test the current video, which
        // the branch above already rejected, so the scan starts at k = 1.
        view.videos
            .iter()
            .skip(1)
            .take(k as usize)
            .find(|c| {
                !c.is_complete()
                    && below_threshold(c.buffered_s, b1 as f64 * c.segment_duration_s, false)
            })
            .map_or(PrefetchDecision::Idle, CandidateVideo::next_segment)
    }

    fn rearm_buffer_s(&self, view: &PolicyView) -> Option<f64> {
        let cur = view.current();
        if cur.is_complete() || !view.current_draining {
            return None;
        }
        let (b1, _) = self.thresholds(view);
        Some(b1 as f64 * cur.segment_duration_s)
    }
}

/// Fetch the current video to completion, then the next `lookahead` videos
/// in order.
fn fill_in_order(view: &PolicyView, lookahead: usize) -> PrefetchDecision {
    view.videos
        .iter()
        .take(lookahead + 1)
        .find(|c| !c.is_complete())
        .map_or(PrefetchDecision::Idle, CandidateVideo::next_segment)
}

pub fn network_aware_decide(view: &PolicyView) -> PrefetchDecision {
    NetworkAware::default().decide(view)
}

pub fn next_one_decide(view: &PolicyView) -> PrefetchDecision {
    fill_in_order(view, 1)
}

pub fn waterfall_decide(view: &PolicyView) -> PrefetchDecision {
    fill_in_order(view, 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    NetworkAware,
    NextOne,
    Waterfall,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [
        PolicyKind::NetworkAware,
        PolicyKind::NextOne,
        PolicyKind::Waterfall,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::NetworkAware => "network-aware",
            PolicyKind::NextOne => "next-one",
            PolicyKind::Waterfall => "waterfall",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "network-aware" => Ok(PolicyKind::NetworkAware),
            "next-one" => Ok(PolicyKind::NextOne),
            "waterfall" => Ok(PolicyKind::Waterfall),
            other => Err(format!(
                "unknown policy {other:?} (expected network-aware, next-one, or waterfall)"
            )),
        }
    }
}

/// A configured policy of any kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    NetworkAware(NetworkAware),
    NextOne,
    Waterfall,
}

impl Policy {
    pub fn from_kind(kind: PolicyKind) -> Self {
        match kind {
            PolicyKind::NetworkAware => Policy::NetworkAware(NetworkAware::default()),
            PolicyKind::NextOne => Policy::NextOne,
            PolicyKind::Waterfall => Policy::Waterfall,
        }
    }

    pub fn kind(&self) -> PolicyKind {
        match self {
            Policy::NetworkAware(_) => PolicyKind::NetworkAware,
            Policy::NextOne => PolicyKind::NextOne,
            Policy::Waterfall => PolicyKind::Waterfall,
        }
    }
}

impl PrefetchPolicy for Policy {
    fn name(&self) -> &'static str {
        self.kind().as_str()
    }

    fn decide(&self, view: &PolicyView) -> PrefetchDecision {
        match self {
            Policy::NetworkAware(p) => p.decide(view),
            Policy::NextOne => next_one_decide(view),
            Policy::Waterfall => waterfall_decide(view),
        }
    }

    fn rearm_buffer_s(&self, view: &PolicyView) -> Option<f64> {
        match self {
            Policy::NetworkAware(p) => p.rearm_buffer_s(view),
            Policy::NextOne | Policy::Waterfall => None,
        }
    }
}
