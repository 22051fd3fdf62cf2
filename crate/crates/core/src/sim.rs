//! Deterministic discrete-event simulation of one viewing session.
//!
//! A single downloader fetches one segment at a time against the
//! ground-truth throughput trace. Playback drains the current video's buffer
//! at one content second per second; the user scrolls once the playhead
//! reaches their intended watch point. Decisions are taken whenever the
//! downloader is free.
//!
//! Event ordering for simultaneous events (within [`TIME_EPSILON`]):
//! download completion (and any stall end or playback start it causes),
//! then stall start, then scroll, then idle wake-ups.
//!
//! # Event log schema
//!
//! One JSON object per line:
//!
//! | field      | type            | meaning                                         |
//! |------------|-----------------|-------------------------------------------------|
//! | `t`        | number          | simulation time, seconds                        |
//! | `kind`     | string          | see [`EventKind`]                               |
//! | `video`    | integer or null | 1-based video id                                |
//! | `segment`  | integer or null | 0-based segment index                           |
//! | `buffer_s` | number or null  | buffered seconds of `video` after the event     |
//! | `value`    | number or null  | kind-specific payload (see [`EventKind`])       |

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics;
use crate::model::{BufferState, Playlist, SessionConfig, SessionMetrics, VideoMetrics};
use crate::policy::{CandidateVideo, PolicyView, PrefetchDecision, PrefetchPolicy};
use crate::traces::{average_throughput, ThroughputSampleLog, ThroughputTrace, UserTrace};
use crate::TIME_EPSILON;

/// Simulation wall clock.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimClock {
    now_s: f64,
}

impl SimClock {
    pub fn now(&self) -> f64 {
        self.now_s
    }

    /// Moves the clock forward. Never goes backwards.
    pub fn advance_to(&mut self, t: f64) {
        debug_assert!(t >= self.now_s - TIME_EPSILON, "clock moved backwards");
        self.now_s = self.now_s.max(t);
    }
}

/// The segment currently being fetched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DownloadJob {
    pub video_index: usize,
    pub segment_index: u32,
    pub size_kbit: f64,
    pub started_at_s: f64,
    pub completes_at_s: f64,
}

impl DownloadJob {
    pub fn bits_remaining(&self, trace: &ThroughputTrace, at: f64) -> f64 {
        (self.size_kbit - delivered_kbit(trace, self.started_at_s, at)).max(0.0)
    }
}

/// Result of fetching one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DownloadOutcome {
    pub completion_s: f64,
    pub duration_s: f64,
    /// Segment size over download time.
    pub measured_kbps: f64,
}

/// Integrates the trace from `start_s` until `size_kbit` has been delivered.
pub fn execute_download(trace: &ThroughputTrace, start_s: f64, size_kbit: f64) -> DownloadOutcome {
    let mut remaining = size_kbit;
    let mut completion_s = start_s;
    for (from, to, kbps) in trace.pieces_from(start_s) {
        let capacity = kbps * (to - from);
        if capacity >= remaining {
            completion_s = from + remaining / kbps;
            break;
        }
        remaining -= capacity;
    }
    let duration_s = completion_s - start_s;
    DownloadOutcome {
        completion_s,
        duration_s,
        measured_kbps: size_kbit / duration_s,
    }
}

/// Kilobits the trace delivers over `[from, to]`.
pub fn delivered_kbit(trace: &ThroughputTrace, from: f64, to: f64) -> f64 {
    let mut total = 0.0;
    for (a, b, kbps) in trace.pieces_from(from) {
        if a >= to {
            break;
        }
        total += kbps * (b.min(to) - a);
    }
    total
}

/// Buffer of a playing video after one more segment arrives:
/// `max(prev - download_time, 0) + tau`.
pub fn buffer_after_download(prev_buffer_s: f64, download_duration_s: f64, tau_s: f64) -> f64 {
    (prev_buffer_s - download_duration_s).max(0.0) + tau_s
}

/// Playback stall while waiting `download_duration_s` with `prev_buffer_s`
/// of content left.
pub fn stall_time(prev_buffer_s: f64, download_duration_s: f64) -> f64 {
    (download_duration_s - prev_buffer_s).max(0.0)
}

pub fn startup_delay(arrival_s: f64, scroll_s: f64) -> f64 {
    (arrival_s - scroll_s).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SessionStart,
    /// `buffer_s` is the video's buffer when the request goes out.
    DownloadStart,
    /// `value`: measured throughput in kbps.
    DownloadComplete,
    /// `value`: kilobits delivered before the abort.
    DownloadAbort,
    /// `value`: start-up delay in seconds.
    PlaybackStart,
    StallStart,
    /// `value`: stall duration in seconds.
    StallEnd,
    /// `video` is the video scrolled away from; `buffer_s` the discarded
    /// seconds; `value` the seconds watched.
    Scroll,
    SessionEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub kind: EventKind,
    pub video: Option<u32>,
    pub segment: Option<u32>,
    pub buffer_s: Option<f64>,
    pub value: Option<f64>,
}

impl EventRecord {
    fn new(t: f64, kind: EventKind) -> Self {
        Self {
            t,
            kind,
            video: None,
            segment: None,
            buffer_s: None,
            value: None,
        }
    }

    fn video(mut self, index: usize) -> Self {
        self.video = Some(index as u32 + 1);
        self
    }

    fn segment(mut self, segment: u32) -> Self {
        self.segment = Some(segment);
        self
    }

    fn buffer(mut self, buffer_s: f64) -> Self {
        self.buffer_s = Some(buffer_s);
        self
    }

    fn value(mut self, value: f64) -> Self {
        self.value = Some(value);
        self
    }
}

pub fn write_event_log(path: impl AsRef<Path>, events: &[EventRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for ev in events {
        serde_json::to_writer(&mut out, ev)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_event_log(path: impl AsRef<Path>) -> Result<Vec<EventRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut events = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            events.push(serde_json::from_str(&line)?);
        }
    }
    Ok(events)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    AwaitingStartup { since: f64 },
    Playing,
    Stalled { since: f64 },
}

/// Snapshot of the player.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaybackState {
    pub current_video_index: usize,
    pub playhead_s: f64,
    pub started: bool,
    pub stalled: bool,
    /// Content seconds left before the user scrolls.
    pub watch_budget_s: f64,
}

/// What happened after a scroll.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScrollOutcome {
    NextVideo(usize),
    SessionEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Pending {
    DownloadDone,
    StallStart,
    Scroll,
    Wake,
}

/// Everything a finished session produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutput {
    pub metrics: SessionMetrics,
    pub events: Vec<EventRecord>,
    pub samples: ThroughputSampleLog,
}

/// A running session. Most callers want [`simulate_session`].
pub struct Session<'a, P: PrefetchPolicy + ?Sized> {
    playlist: &'a Playlist,
    trace: &'a ThroughputTrace,
    user: &'a UserTrace,
    policy: &'a P,
    config: &'a SessionConfig,
    clock: SimClock,
    buffers: Vec<BufferState>,
    videos: Vec<VideoMetrics>,
    current: usize,
    playhead_s: f64,
    phase: Phase,
    job: Option<DownloadJob>,
    samples: ThroughputSampleLog,
    events: Vec<EventRecord>,
    finished: bool,
    audit: bool,
}

impl<'a, P: PrefetchPolicy + ?Sized> Session<'a, P> {
    pub fn new(
        playlist: &'a Playlist,
        trace: &'a ThroughputTrace,
        user: &'a UserTrace,
        policy: &'a P,
        config: &'a SessionConfig,
    ) -> Result<Self> {
        config.validate()?;
        if user.len() > playlist.len() {
            return Err(Error::UserTraceTooLong {
                trace_len: user.len(),
                playlist_len: playlist.len(),
            });
        }
        if user.is_empty() {
            return Err(Error::EmptyTrace("user trace".into()));
        }
        let videos = playlist
            .videos()
            .iter()
            .map(|v| VideoMetrics {
                id: v.id,
                bitrate_kbps: v.bitrate_kbps,
                ..VideoMetrics::default()
            })
            .collect();
        let mut session = Self {
            playlist,
            trace,
            user,
            policy,
            config,
            clock: SimClock::default(),
            buffers: vec![BufferState::default(); playlist.len()],
            videos,
            current: 0,
            playhead_s: 0.0,
            phase: Phase::AwaitingStartup { since: 0.0 },
            job: None,
            samples: ThroughputSampleLog::new(),
            events: Vec::new(),
            finished: false,
            audit: cfg!(debug_assertions),
        };
        session.events.push(EventRecord::new(0.0, EventKind::SessionStart));
        session.videos[0].opened = true;
        Ok(session)
    }

    /// Enables or disables the per-event state audit (on by default in
    /// debug builds).
    pub fn with_audit(mut self, audit: bool) -> Self {
        self.audit = audit;
        self
    }

    pub fn now(&self) -> f64 {
        self.clock.now()
    }

    pub fn buffers(&self) -> &[BufferState] {
        &self.buffers
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn playback(&self) -> PlaybackState {
        PlaybackState {
            current_video_index: self.current,
            playhead_s: self.playhead_s,
            started: !matches!(self.phase, Phase::AwaitingStartup { .. }),
            stalled: matches!(self.phase, Phase::Stalled { .. }),
            watch_budget_s: (self.stop_point() - self.playhead_s).max(0.0),
        }
    }

    fn tau(&self, index: usize) -> f64 {
        self.playlist.videos()[index].segment_duration_s
    }

    /// Content position at which the user leaves the current video.
    fn stop_point(&self) -> f64 {
        let video = &self.playlist.videos()[self.current];
        self.user.durations()[self.current].min(video.duration_s)
    }

    fn startup_segments(&self, index: usize) -> u32 {
        self.config
            .startup_threshold_segments
            .min(self.playlist.videos()[index].segment_count())
    }

    pub fn view(&self) -> PolicyView {
        let videos = (self.current..self.playlist.len())
            .map(|i| {
                let spec = &self.playlist.videos()[i];
                CandidateVideo {
                    index: i,
                    buffered_s: self.buffers[i].buffered_seconds,
                    downloaded_segments: self.buffers[i].downloaded_segments,
                    segment_count: spec.segment_count(),
                    segment_duration_s: spec.segment_duration_s,
                }
            })
            .collect();
        PolicyView {
            videos,
            current_bitrate_kbps: self.playlist.videos()[self.current].bitrate_kbps,
            alpha_kbps: average_throughput(
                &self.samples,
                self.clock.now(),
                self.config.throughput_window_s,
            ),
            current_draining: self.phase == Phase::Playing,
        }
    }

    fn start_job(&mut self, video_index: usize, segment_index: u32) -> Result<()> {
        let invalid = |reason: String| Error::InvalidDecision {
            policy: self.policy.name().to_owned(),
            reason,
        };
        if video_index < self.current || video_index >= self.playlist.len() {
            return Err(invalid(format!(
                "video index {video_index} outside [{}, {})",
                self.current,
                self.playlist.len()
            )));
        }
        let spec = &self.playlist.videos()[video_index];
        let buf = &self.buffers[video_index];
        if segment_index != buf.downloaded_segments || segment_index >= spec.segment_count() {
            return Err(invalid(format!(
                "video {} segment {segment_index}: next in-order segment is {} of {}",
                spec.id,
                buf.downloaded_segments,
                spec.segment_count()
            )));
        }
        let now = self.clock.now();
        let size_kbit = spec.segment_kbit();
        let outcome = execute_download(self.trace, now, size_kbit);
        self.job = Some(DownloadJob {
            video_index,
            segment_index,
            size_kbit,
            started_at_s: now,
            completes_at_s: outcome.completion_s,
        });
        self.events.push(
            EventRecord::new(now, EventKind::DownloadStart)
                .video(video_index)
                .segment(segment_index)
                .buffer(buf.buffered_seconds),
        );
        Ok(())
    }

    fn next_pending(&self) -> Option<(f64, Pending)> {
        let now = self.clock.now();
        let mut candidates: Vec<(f64, Pending)> = Vec::with_capacity(4);
        if let Some(job) = &self.job {
            candidates.push((job.completes_at_s, Pending::DownloadDone));
        }
        let buffered = self.buffers[self.current].buffered_seconds;
        if self.phase == Phase::Playing {
            let remaining = self.stop_point() - self.playhead_s;
            if remaining <= buffered + TIME_EPSILON {
                candidates.push((now + remaining.max(0.0), Pending::Scroll));
            } else {
                candidates.push((now + buffered.max(0.0), Pending::StallStart));
            }
        }
        if self.job.is_none() {
            if self.phase == Phase::Playing {
                if let Some(level) = self.policy.rearm_buffer_s(&self.view()) {
                    if buffered > level + TIME_EPSILON {
                        candidates.push((now + (buffered - level), Pending::Wake));
                    }
                }
            }
            // the next measured sample to leave the averaging window
            let window = self.config.throughput_window_s;
            let samples = self.samples.samples();
            let idx = samples.partition_point(|s| s.completion_s <= now - window + TIME_EPSILON);
            if let Some(s) = samples.get(idx) {
                candidates.push((s.completion_s + window, Pending::Wake));
            }
        }
        candidates.into_iter().reduce(|best, c| {
            if c.0 < best.0 - TIME_EPSILON || ((c.0 - best.0).abs() <= TIME_EPSILON && c.1 < best.1)
            {
                c
            } else {
                best
            }
        })
    }

    /// Runs playback forward to `t`.
    fn advance(&mut self, t: f64) {
        let dt = (t - self.clock.now()).max(0.0);
        match self.phase {
            Phase::Playing => {
                let buf = &mut self.buffers[self.current];
                // sub-epsilon overshoot is rounding, not a stall
                let stalled = Some(stall_time(buf.buffered_seconds, dt))
                    .filter(|&s| s > TIME_EPSILON)
                    .unwrap_or(0.0);
                self.videos[self.current].rebuffer_s += stalled;
                self.playhead_s += dt - stalled;
                buf.buffered_seconds = (buf.buffered_seconds - dt).max(0.0);
            }
            Phase::Stalled { .. } => {
                self.videos[self.current].rebuffer_s += stall_time(0.0, dt);
            }
            Phase::AwaitingStartup { .. } => {}
        }
        self.clock.advance_to(t);
    }

    fn complete_download(&mut self) -> Result<()> {
        let job = self.job.take().expect("pending download");
        let now = self.clock.now();
        let v = job.video_index;
        let tau = self.tau(v);
        let buf = &mut self.buffers[v];
        buf.downloaded_segments += 1;
        buf.buffered_seconds += tau;
        let buffered = buf.buffered_seconds;
        let downloaded = buf.downloaded_segments;
        self.videos[v].downloaded_s += tau;
        let measured = job.size_kbit / (now - job.started_at_s);
        self.samples.push(now, measured)?;
        self.events.push(
            EventRecord::new(now, EventKind::DownloadComplete)
                .video(v)
                .segment(job.segment_index)
                .buffer(buffered)
                .value(measured),
        );
        if v != self.current {
            return Ok(());
        }
        match self.phase {
            Phase::AwaitingStartup { since } if downloaded >= self.startup_segments(v) => {
                let delay = startup_delay(now, since);
                self.videos[v].startup_delay_s = delay;
                self.phase = Phase::Playing;
                self.events.push(
                    EventRecord::new(now, EventKind::PlaybackStart)
                        .video(v)
                        .buffer(buffered)
                        .value(delay),
                );
            }
            Phase::Stalled { since } => {
                self.phase = Phase::Playing;
                self.events.push(
                    EventRecord::new(now, EventKind::StallEnd)
                        .video(v)
                        .buffer(buffered)
                        .value(now - since),
                );
            }
            _ => {}
        }
        Ok(())
    }

    fn abort_job(&mut self) {
        let Some(job) = self.job.take() else { return };
        let now = self.clock.now();
        let partial = delivered_kbit(self.trace, job.started_at_s, now).min(job.size_kbit);
        self.videos[job.video_index].aborted_kbit += partial;
        self.events.push(
            EventRecord::new(now, EventKind::DownloadAbort)
                .video(job.video_index)
                .segment(job.segment_index)
                .buffer(self.buffers[job.video_index].buffered_seconds)
                .value(partial),
        );
    }

    /// The user leaves the current video: its buffer is discarded and
    /// recorded as waste, an in-flight request for it is cancelled, and the
    /// next video becomes current.
    pub fn apply_scroll(&mut self) -> ScrollOutcome {
        let now = self.clock.now();
        let cur = self.current;
        let stop = self.stop_point();
        self.playhead_s = stop;
        let waste = self.buffers[cur].buffered_seconds.max(0.0);
        {
            let m = &mut self.videos[cur];
            m.watched_s = stop;
            m.waste_s = waste;
        }
        let buf = &mut self.buffers[cur];
        buf.buffered_seconds = 0.0;
        buf.discarded = true;
        if self.job.is_some_and(|j| j.video_index == cur) {
            self.abort_job();
        }
        self.events.push(
            EventRecord::new(now, EventKind::Scroll)
                .video(cur)
                .buffer(waste)
                .value(stop),
        );

        let next = cur + 1;
        if next >= self.user.len() {
            self.finish();
            return ScrollOutcome::SessionEnd;
        }
        self.current = next;
        self.playhead_s = 0.0;
        self.videos[next].opened = true;
        if self.buffers[next].downloaded_segments >= self.startup_segments(next) {
            self.phase = Phase::Playing;
            self.events.push(
                EventRecord::new(now, EventKind::PlaybackStart)
                    .video(next)
                    .buffer(self.buffers[next].buffered_seconds)
                    .value(0.0),
            );
        } else {
            self.phase = Phase::AwaitingStartup { since: now };
        }
        ScrollOutcome::NextVideo(next)
    }

    fn finish(&mut self) {
        self.abort_job();
        let count_as_waste = self.config.count_residual_buffers_as_waste;
        for i in self.user.len()..self.playlist.len() {
            let left = self.buffers[i].buffered_seconds;
            if count_as_waste {
                self.videos[i].waste_s = left;
            } else {
                self.videos[i].residual_s = left;
            }
        }
        self.events
            .push(EventRecord::new(self.clock.now(), EventKind::SessionEnd));
        self.finished = true;
    }

    /// Checks buffer and playback invariants.
    pub fn audit(&self) -> std::result::Result<(), String> {
        for (buf, spec) in self.buffers.iter().zip(self.playlist.videos()) {
            buf.check(spec)?;
        }
        if self.finished {
            return Ok(());
        }
        let stop = self.stop_point();
        if self.playhead_s < -TIME_EPSILON || self.playhead_s > stop + TIME_EPSILON {
            return Err(format!(
                "playhead {} outside [0, {stop}]",
                self.playhead_s
            ));
        }
        let buffered = self.buffers[self.current].buffered_seconds;
        let stalled = matches!(self.phase, Phase::Stalled { .. });
        let starved = !matches!(self.phase, Phase::AwaitingStartup { .. })
            && buffered <= TIME_EPSILON
            && self.playhead_s < stop - TIME_EPSILON;
        // a buffer that empties at the same instant as another event is
        // allowed to be starved but not yet stalled for one step
        let stall_due_now = matches!(
            self.next_pending(),
            Some((t, Pending::StallStart)) if t <= self.clock.now() + TIME_EPSILON
        );
        if stalled != starved && !(starved && stall_due_now) {
            return Err(format!(
                "stalled={stalled} but buffer={buffered} playhead={} stop={stop}",
                self.playhead_s
            ));
        }
        if let Some(job) = &self.job {
            if job.video_index < self.current {
                return Err(format!("download for discarded video {}", job.video_index + 1));
            }
        }
        Ok(())
    }

    /// Processes one decision and the event that follows it. Returns false
    /// once the session has ended.
    pub fn step(&mut self) -> Result<bool> {
        if self.finished {
            return Ok(false);
        }
        if self.job.is_none() {
            if let PrefetchDecision::Download {
                video_index,
                segment_index,
            } = self.policy.decide(&self.view())
            {
                self.start_job(video_index, segment_index)?;
            }
        }
        let Some((t, pending)) = self.next_pending() else {
            return Err(Error::Deadlock {
                at: self.clock.now(),
            });
        };
        self.advance(t);
        match pending {
            Pending::DownloadDone => self.complete_download()?,
            Pending::StallStart => {
                let now = self.clock.now();
                self.buffers[self.current].buffered_seconds = 0.0;
                self.phase = Phase::Stalled { since: now };
                self.events.push(
                    EventRecord::new(now, EventKind::StallStart)
                        .video(self.current)
                        .buffer(0.0),
                );
            }
            Pending::Scroll => {
                self.apply_scroll();
            }
            Pending::Wake => {}
        }
        if self.audit {
            self.audit().map_err(|reason| Error::Audit {
                at: self.clock.now(),
                reason,
            })?;
        }
        Ok(!self.finished)
    }

    pub fn run(mut self) -> Result<SessionOutput> {
        while self.step()? {}
        let metrics = metrics::session_metrics(self.videos, &self.config.qoe_weights);
        Ok(SessionOutput {
            metrics,
            events: self.events,
            samples: self.samples,
        })
    }
}

/// Runs a whole session until the user trace is exhausted.
pub fn simulate_session<P: PrefetchPolicy + ?Sized>(
    playlist: &Playlist,
    trace: &ThroughputTrace,
    user: &UserTrace,
    policy: &P,
    config: &SessionConfig,
) -> Result<SessionOutput> {
    Session::new(playlist, trace, user, policy, config)?.run()
}
