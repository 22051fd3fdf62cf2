//! C ABI for the scrollfetch simulator.
//!
//! Objects cross the boundary as opaque handles created by `sf_*_new` /
//! `sf_*_load` style constructors and released with the matching `*_free`.
//! Every fallible call returns an [`SfStatus`]; on failure the message is
//! available from [`sf_last_error_message`] on the same thread until the
//! next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use scrollfetch::experiment::{run_matrix, write_outputs, Experiment};
use scrollfetch::metrics::ReportFormat;
use scrollfetch::model::{Playlist, QoeWeights, SessionConfig, SessionTotals};
use scrollfetch::policy::{compute_b1, compute_lookahead_k, Policy, PolicyKind};
use scrollfetch::sim::{simulate_session, EventKind, EventRecord};
use scrollfetch::traces::{generate_user_trace, ThroughputTrace, UserTrace};
use scrollfetch::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidTrace = 3,
    InvalidConfig = 4,
    Io = 5,
    Simulation = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfPolicy {
    NetworkAware = 0,
    NextOne = 1,
    Waterfall = 2,
}

impl From<SfPolicy> for PolicyKind {
    fn from(p: SfPolicy) -> Self {
        match p {
            SfPolicy::NetworkAware => PolicyKind::NetworkAware,
            SfPolicy::NextOne => PolicyKind::NextOne,
            SfPolicy::Waterfall => PolicyKind::Waterfall,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfReportFormat {
    Csv = 0,
    Json = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfEventKind {
    SessionStart = 0,
    DownloadStart = 1,
    DownloadComplete = 2,
    DownloadAbort = 3,
    PlaybackStart = 4,
    StallStart = 5,
    StallEnd = 6,
    Scroll = 7,
    SessionEnd = 8,
}

impl From<EventKind> for SfEventKind {
    fn from(k: EventKind) -> Self {
        match k {
            EventKind::SessionStart => SfEventKind::SessionStart,
            EventKind::DownloadStart => SfEventKind::DownloadStart,
            EventKind::DownloadComplete => SfEventKind::DownloadComplete,
            EventKind::DownloadAbort => SfEventKind::DownloadAbort,
            EventKind::PlaybackStart => SfEventKind::PlaybackStart,
            EventKind::StallStart => SfEventKind::StallStart,
            EventKind::StallEnd => SfEventKind::StallEnd,
            EventKind::Scroll => SfEventKind::Scroll,
            EventKind::SessionEnd => SfEventKind::SessionEnd,
        }
    }
}

/// Playlist of identical videos plus per-session settings.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfSessionParams {
    pub videos: u32,
    pub duration_s: f64,
    pub bitrate_kbps: f64,
    pub segment_duration_s: f64,
    pub startup_threshold_segments: u32,
    pub throughput_window_s: f64,
    pub count_residual_buffers_as_waste: bool,
    pub weight_bitrate: f64,
    pub weight_rebuffer: f64,
    pub weight_startup: f64,
    pub weight_waste: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SfSessionTotals {
    pub waste_s: f64,
    pub startup_delay_s: f64,
    pub rebuffer_s: f64,
    pub watched_s: f64,
    pub downloaded_s: f64,
    pub residual_s: f64,
    pub waste_mbit: f64,
    pub overall_quality: f64,
}

/// One event-log entry. Absent fields are `-1` (`video`, `segment`) or NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfEvent {
    pub t: f64,
    pub kind: SfEventKind,
    pub video: i64,
    pub segment: i64,
    pub buffer_s: f64,
    pub value: f64,
}

impl From<&EventRecord> for SfEvent {
    fn from(e: &EventRecord) -> Self {
        SfEvent {
            t: e.t,
            kind: e.kind.into(),
            video: e.video.map_or(-1, i64::from),
            segment: e.segment.map_or(-1, i64::from),
            buffer_s: e.buffer_s.unwrap_or(f64::NAN),
            value: e.value.unwrap_or(f64::NAN),
        }
    }
}

pub struct SfThroughputTrace(ThroughputTrace);

pub struct SfUserTrace(UserTrace);

pub struct SfSessionResult {
    totals: SfSessionTotals,
    events: Vec<EventRecord>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: SfStatus, msg: impl Into<String>) -> SfStatus {
    set_error(msg);
    status
}

fn status_of(err: &Error) -> SfStatus {
    match err {
        Error::TraceParse { .. } | Error::EmptyTrace(_) | Error::InvalidTrace(_) => {
            SfStatus::InvalidTrace
        }
        Error::UserTraceTooLong { .. }
        | Error::EmptyPlaylist
        | Error::InvalidVideo { .. }
        | Error::InvalidConfig(_)
        | Error::ConfigParse { .. } => SfStatus::InvalidConfig,
        Error::Io { .. } => SfStatus::Io,
        Error::InvalidDecision { .. } | Error::Audit { .. } | Error::Deadlock { .. } | Error::Json(_) => {
            SfStatus::Simulation
        }
    }
}

fn from_error(err: Error) -> SfStatus {
    fail(status_of(&err), err.to_string())
}

fn guard(f: impl FnOnce() -> SfStatus) -> SfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(SfStatus::Panic, "internal panic"),
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, SfStatus> {
    if p.is_null() {
        return Err(fail(SfStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(SfStatus::InvalidArgument, "path is not valid UTF-8"))
}

unsafe fn slice_arg<'a>(values: *const f64, len: usize) -> Result<&'a [f64], SfStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if values.is_null() {
        return Err(fail(SfStatus::NullPointer, "values is null"));
    }
    Ok(std::slice::from_raw_parts(values, len))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static, NUL-terminated version string.
#[no_mangle]
pub extern "C" fn sf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Buffer target in segments for measured throughput `alpha_kbps`. Pass
/// `has_alpha = false` before any measurement exists.
#[no_mangle]
pub extern "C" fn sf_compute_b1(alpha_kbps: f64, has_alpha: bool, bitrate_kbps: f64) -> u32 {
    compute_b1(has_alpha.then_some(alpha_kbps), bitrate_kbps)
}

/// Number of following videos the network-aware policy may prefetch.
#[no_mangle]
pub extern "C" fn sf_compute_lookahead_k(alpha_kbps: f64, has_alpha: bool, bitrate_kbps: f64) -> u32 {
    compute_lookahead_k(has_alpha.then_some(alpha_kbps), bitrate_kbps)
}

/// Builds a trace with one value per second.
///
/// # Safety
/// `kbps` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_throughput_trace_from_values(
    kbps: *const f64,
    len: usize,
    wrap: bool,
    out: *mut *mut SfThroughputTrace,
) -> SfStatus {
    guard(|| {
        if out.is_null() {
            return fail(SfStatus::NullPointer, "out is null");
        }
        let values = match slice_arg(kbps, len) {
            Ok(v) => v,
            Err(s) => return s,
        };
        match ThroughputTrace::from_per_second(values, wrap) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(SfThroughputTrace(t)));
                SfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_throughput_trace_load(
    path: *const c_char,
    wrap: bool,
    out: *mut *mut SfThroughputTrace,
) -> SfStatus {
    guard(|| {
        if out.is_null() {
            return fail(SfStatus::NullPointer, "out is null");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match ThroughputTrace::load(path, wrap) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(SfThroughputTrace(t)));
                SfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `trace` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn sf_throughput_trace_mean_kbps(trace: *const SfThroughputTrace) -> f64 {
    trace.as_ref().map_or(f64::NAN, |t| t.0.mean_kbps())
}

/// # Safety
/// `trace` must be a handle from this library, or null. Freed handles must
/// not be used again.
#[no_mangle]
pub unsafe extern "C" fn sf_throughput_trace_free(trace: *mut SfThroughputTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// # Safety
/// `durations_s` must point to `len` readable doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sf_user_trace_from_values(
    durations_s: *const f64,
    len: usize,
    out: *mut *mut SfUserTrace,
) -> SfStatus {
    guard(|| {
        if out.is_null() {
            return fail(SfStatus::NullPointer, "out is null");
        }
        let values = match slice_arg(durations_s, len) {
            Ok(v) => v,
            Err(s) => return s,
        };
        match UserTrace::new(values.to_vec()) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(SfUserTrace(t)));
                SfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Gaussian watch durations summing to at least `total_s`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_user_trace_generate(
    mean_s: f64,
    stddev_s: f64,
    total_s: f64,
    seed: u64,
    out: *mut *mut SfUserTrace,
) -> SfStatus {
    guard(|| {
        if out.is_null() {
            return fail(SfStatus::NullPointer, "out is null");
        }
        let ok = mean_s.is_finite()
            && mean_s > 0.0
            && stddev_s.is_finite()
            && stddev_s >= 0.0
            && total_s.is_finite()
            && total_s > 0.0;
        if !ok {
            return fail(
                SfStatus::InvalidArgument,
                "need mean_s > 0, stddev_s >= 0, total_s > 0",
            );
        }
        let t = generate_user_trace(mean_s, stddev_s, total_s, seed);
        *out = Box::into_raw(Box::new(SfUserTrace(t)));
        SfStatus::Ok
    })
}

/// # Safety
/// `trace` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn sf_user_trace_len(trace: *const SfUserTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.len())
}

/// Copies up to `cap` durations into `buf` and returns how many were
/// copied.
///
/// # Safety
/// `trace` must be a valid handle or null; `buf` must have room for `cap`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn sf_user_trace_copy(trace: *const SfUserTrace, buf: *mut f64, cap: usize) -> usize {
    let Some(t) = trace.as_ref() else { return 0 };
    if buf.is_null() {
        return 0;
    }
    let d = t.0.durations();
    let n = d.len().min(cap);
    ptr::copy_nonoverlapping(d.as_ptr(), buf, n);
    n
}

/// # Safety
/// `trace` must be a handle from this library, or null.
#[no_mangle]
pub unsafe extern "C" fn sf_user_trace_free(trace: *mut SfUserTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Defaults: one-segment start-up, 10 s window, unit weights, residual
/// buffers counted as waste, 15 s videos of 1 s segments at 2000 kbps.
#[no_mangle]
pub extern "C" fn sf_session_params_default(videos: u32) -> SfSessionParams {
    let cfg = SessionConfig::default();
    SfSessionParams {
        videos,
        duration_s: 15.0,
        bitrate_kbps: 2000.0,
        segment_duration_s: 1.0,
        startup_threshold_segments: cfg.startup_threshold_segments,
        throughput_window_s: cfg.throughput_window_s,
        count_residual_buffers_as_waste: cfg.count_residual_buffers_as_waste,
        weight_bitrate: cfg.qoe_weights.bitrate,
        weight_rebuffer: cfg.qoe_weights.rebuffer,
        weight_startup: cfg.qoe_weights.startup,
        weight_waste: cfg.qoe_weights.waste,
    }
}

fn totals(t: &SessionTotals, oq: f64) -> SfSessionTotals {
    SfSessionTotals {
        waste_s: t.waste_s,
        startup_delay_s: t.startup_delay_s,
        rebuffer_s: t.rebuffer_s,
        watched_s: t.watched_s,
        downloaded_s: t.downloaded_s,
        residual_s: t.residual_s,
        waste_mbit: t.waste_mbit,
        overall_quality: oq,
    }
}

/// Simulates one session and returns a result handle holding totals and
/// the event log.
///
/// # Safety
/// `params`, `trace` and `user` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_simulate(
    params: *const SfSessionParams,
    trace: *const SfThroughputTrace,
    user: *const SfUserTrace,
    policy: SfPolicy,
    out: *mut *mut SfSessionResult,
) -> SfStatus {
    guard(|| {
        let (Some(p), Some(trace), Some(user)) = (params.as_ref(), trace.as_ref(), user.as_ref()) else {
            return fail(SfStatus::NullPointer, "params, trace and user must be non-null");
        };
        if out.is_null() {
            return fail(SfStatus::NullPointer, "out is null");
        }
        let playlist = match Playlist::uniform(p.videos as usize, p.bitrate_kbps, p.duration_s, p.segment_duration_s) {
            Ok(pl) => pl,
            Err(e) => return from_error(e),
        };
        let config = SessionConfig {
            startup_threshold_segments: p.startup_threshold_segments,
            throughput_window_s: p.throughput_window_s,
            qoe_weights: QoeWeights {
                bitrate: p.weight_bitrate,
                rebuffer: p.weight_rebuffer,
                startup: p.weight_startup,
                waste: p.weight_waste,
            },
            rng_seed: 0,
            count_residual_buffers_as_waste: p.count_residual_buffers_as_waste,
        };
        let policy = Policy::from_kind(policy.into());
        match simulate_session(&playlist, &trace.0, &user.0, &policy, &config) {
            Ok(o) => {
                let result = SfSessionResult {
                    totals: totals(&o.metrics.totals, o.metrics.overall_quality),
                    events: o.events,
                };
                *out = Box::into_raw(Box::new(result));
                SfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `result` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn sf_session_result_totals(result: *const SfSessionResult) -> SfSessionTotals {
    result.as_ref().map_or_else(SfSessionTotals::default, |r| r.totals)
}

/// # Safety
/// `result` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn sf_session_result_event_count(result: *const SfSessionResult) -> usize {
    result.as_ref().map_or(0, |r| r.events.len())
}

/// # Safety
/// `result` must be a valid handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_session_result_event(
    result: *const SfSessionResult,
    index: usize,
    out: *mut SfEvent,
) -> SfStatus {
    let Some(r) = result.as_ref() else {
        return fail(SfStatus::NullPointer, "result is null");
    };
    if out.is_null() {
        return fail(SfStatus::NullPointer, "out is null");
    }
    match r.events.get(index) {
        Some(e) => {
            *out = e.into();
            SfStatus::Ok
        }
        None => fail(
            SfStatus::InvalidArgument,
            format!("event index {index} out of range 0..{}", r.events.len()),
        ),
    }
}

/// Writes the event log as JSON lines.
///
/// # Safety
/// `result` must be a valid handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sf_session_result_write_log(result: *const SfSessionResult, path: *const c_char) -> SfStatus {
    guard(|| {
        let Some(r) = result.as_ref() else {
            return fail(SfStatus::NullPointer, "result is null");
        };
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match scrollfetch::sim::write_event_log(path, &r.events) {
            Ok(()) => SfStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `result` must be a handle from this library, or null.
#[no_mangle]
pub unsafe extern "C" fn sf_session_result_free(result: *mut SfSessionResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Runs a whole experiment config and writes its report into `out_dir`.
/// Event logs are written when `event_logs` is true.
///
/// # Safety
/// `config_path` and `out_dir` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn sf_run_experiment(
    config_path: *const c_char,
    out_dir: *const c_char,
    format: SfReportFormat,
    event_logs: bool,
) -> SfStatus {
    guard(|| {
        let (config, out) = match (path_arg(config_path), path_arg(out_dir)) {
            (Ok(c), Ok(o)) => (c, o),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let exp = match Experiment::load(&config) {
            Ok(e) => e,
            Err(e) => return from_error(e),
        };
        let format = match format {
            SfReportFormat::Csv => ReportFormat::Csv,
            SfReportFormat::Json => ReportFormat::Json,
        };
        match run_matrix(&exp).and_then(|o| write_outputs(&exp, &o, &out, format, event_logs)) {
            Ok(_) => SfStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}
