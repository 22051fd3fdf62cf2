//! Domain types shared by the trace, policy, simulation, and report layers.
//!
//! All buffer quantities are content seconds. Sizes in kilobits are derived
//! as `seconds * bitrate_kbps`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when checking that a duration is a whole number
/// of segments.
const DIVISIBILITY_TOLERANCE: f64 = 1e-9;

/// One video of the session, encoded at a single constant bitrate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoSpec {
    /// 1-based position in the playlist.
    pub id: u32,
    pub bitrate_kbps: f64,
    pub duration_s: f64,
    pub segment_duration_s: f64,
}

impl VideoSpec {
    pub fn new(id: u32, bitrate_kbps: f64, duration_s: f64, segment_duration_s: f64) -> Self {
        Self {
            id,
            bitrate_kbps,
            duration_s,
            segment_duration_s,
        }
    }

    /// Checks every per-video invariant, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| {
            Err(Error::InvalidVideo {
                id: self.id,
                reason: reason.to_owned(),
            })
        };
        if !(self.bitrate_kbps.is_finite() && self.bitrate_kbps > 0.0) {
            return fail("bitrate must be positive");
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return fail("duration must be positive");
        }
        if !(self.segment_duration_s.is_finite() && self.segment_duration_s > 0.0) {
            return fail("segment duration must be positive");
        }
        let ratio = self.duration_s / self.segment_duration_s;
        if (ratio - ratio.round()).abs() > DIVISIBILITY_TOLERANCE * ratio.max(1.0) || ratio.round() < 1.0
        {
            return fail("duration not multiple of segment");
        }
        Ok(())
    }

    /// Number of segments `L / tau`.
    pub fn segment_count(&self) -> u32 {
        segment_count(self)
    }

    /// Size of one segment in kilobits.
    pub fn segment_kbit(&self) -> f64 {
        self.segment_duration_s * self.bitrate_kbps
    }
}

/// `M = L / tau` for a valid video.
pub fn segment_count(video: &VideoSpec) -> u32 {
    (video.duration_s / video.segment_duration_s).round() as u32
}

/// The ordered set of videos the user scrolls through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Playlist {
    videos: Vec<VideoSpec>,
}

impl Playlist {
    /// Builds and validates a playlist.
    pub fn new(videos: Vec<VideoSpec>) -> Result<Self> {
        validate_playlist(Playlist { videos })
    }

    /// `n` identical videos with ids `1..=n`.
    pub fn uniform(n: usize, bitrate_kbps: f64, duration_s: f64, segment_duration_s: f64) -> Result<Self> {
        let videos = (1..=n as u32)
            .map(|id| VideoSpec::new(id, bitrate_kbps, duration_s, segment_duration_s))
            .collect();
        Self::new(videos)
    }

    pub fn videos(&self) -> &[VideoSpec] {
        &self.videos
    }

    pub fn len(&self) -> usize {
        self.videos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.videos.is_empty()
    }

    /// Video at a 0-based index.
    pub fn get(&self, index: usize) -> Option<&VideoSpec> {
        self.videos.get(index)
    }

    pub fn max_bitrate_kbps(&self) -> f64 {
        self.videos
            .iter()
            .map(|v| v.bitrate_kbps)
            .fold(0.0, f64::max)
    }
}

/// Returns the playlist iff it is non-empty, ids run `1..=N`, and every
/// video is valid.
pub fn validate_playlist(playlist: Playlist) -> Result<Playlist> {
    if playlist.videos.is_empty() {
        return Err(Error::EmptyPlaylist);
    }
    for (pos, video) in playlist.videos.iter().enumerate() {
        if video.id as usize != pos + 1 {
            return Err(Error::InvalidVideo {
                id: video.id,
                reason: format!("expected id {} at position {}", pos + 1, pos + 1),
            });
        }
        video.validate()?;
    }
    Ok(playlist)
}

/// Weights of the linear overall-quality score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoeWeights {
    pub bitrate: f64,
    pub rebuffer: f64,
    pub startup: f64,
    pub waste: f64,
}

impl Default for QoeWeights {
    fn default() -> Self {
        Self {
            bitrate: 1.0,
            rebuffer: 1.0,
            startup: 1.0,
            waste: 1.0,
        }
    }
}

impl QoeWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.bitrate, self.rebuffer, self.startup, self.waste];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidConfig("qoe weights must be non-negative".into()))
        }
    }
}

/// Per-session knobs that are not part of the playlist or the traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    /// Segments that must be buffered before a video starts playing.
    pub startup_threshold_segments: u32,
    /// Averaging window for measured throughput, seconds.
    pub throughput_window_s: f64,
    pub qoe_weights: QoeWeights,
    pub rng_seed: u64,
    /// When false, data left in buffers at session end is reported as
    /// residual instead of waste.
    pub count_residual_buffers_as_waste: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            startup_threshold_segments: 1,
            throughput_window_s: 10.0,
            qoe_weights: QoeWeights::default(),
            rng_seed: 0,
            count_residual_buffers_as_waste: true,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.startup_threshold_segments < 1 {
            return Err(Error::InvalidConfig(
                "startup threshold must be at least one segment".into(),
            ));
        }
        if !(self.throughput_window_s.is_finite() && self.throughput_window_s > 0.0) {
            return Err(Error::InvalidConfig(
                "throughput window must be positive".into(),
            ));
        }
        self.qoe_weights.validate()
    }
}

/// Client-side buffer of one video.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BufferState {
    /// Segments fetched contiguously from index 0.
    pub downloaded_segments: u32,
    /// Unplayed buffered content, seconds.
    pub buffered_seconds: f64,
    pub discarded: bool,
}

impl BufferState {
    /// Checks the buffer invariants against the owning video.
    pub fn check(&self, video: &VideoSpec) -> std::result::Result<(), String> {
        let m = video.segment_count();
        if self.downloaded_segments > m {
            return Err(format!(
                "video {}: {} segments downloaded of {}",
                video.id, self.downloaded_segments, m
            ));
        }
        let cap = self.downloaded_segments as f64 * video.segment_duration_s;
        if self.buffered_seconds < -1e-9 || self.buffered_seconds > cap + 1e-9 {
            return Err(format!(
                "video {}: buffered {:.12}s outside [0, {}]",
                video.id, self.buffered_seconds, cap
            ));
        }
        Ok(())
    }

    pub fn is_complete(&self, video: &VideoSpec) -> bool {
        self.downloaded_segments >= video.segment_count()
    }
}

/// Outcome for one video of a session.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VideoMetrics {
    pub id: u32,
    pub bitrate_kbps: f64,
    /// Content seconds fetched in full segments.
    pub downloaded_s: f64,
    pub watched_s: f64,
    pub waste_s: f64,
    pub startup_delay_s: f64,
    pub rebuffer_s: f64,
    /// Buffered seconds left at session end and not counted as waste.
    pub residual_s: f64,
    /// Kilobits of aborted partial downloads.
    pub aborted_kbit: f64,
    /// Whether the user ever scrolled to this video.
    pub opened: bool,
}

/// Session-wide totals.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionTotals {
    pub waste_s: f64,
    pub startup_delay_s: f64,
    pub rebuffer_s: f64,
    pub watched_s: f64,
    pub downloaded_s: f64,
    pub residual_s: f64,
    /// Wasted content plus aborted partial downloads, megabits.
    pub waste_mbit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub videos: Vec<VideoMetrics>,
    pub totals: SessionTotals,
    pub overall_quality: f64,
}
