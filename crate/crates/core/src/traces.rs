//! Throughput and user-behaviour traces, plus the client's measured
//! throughput log.
//!
//! Text formats (both): one positive decimal per line, blank lines and lines
//! starting with `#` ignored. A throughput file holds kbps values where line
//! `k` covers the bin `[k-1, k)` seconds; a user trace holds per-video watch
//! times in seconds, in playback order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for deciding whether a sample lies inside the averaging window.
const WINDOW_EPSILON: f64 = 1e-9;

/// Ground-truth network throughput, piecewise constant over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputTrace {
    starts: Vec<f64>,
    kbps: Vec<f64>,
    duration_s: f64,
    wrap: bool,
}

impl ThroughputTrace {
    /// Builds a trace from `(start_time_s, kbps)` pairs. The last bin ends at
    /// `duration_s`.
    pub fn new(samples: &[(f64, f64)], duration_s: f64, wrap: bool) -> Result<Self> {
        let Some(&(first, _)) = samples.first() else {
            return Err(Error::EmptyTrace("throughput trace".into()));
        };
        if first != 0.0 {
            return Err(Error::InvalidTrace("first sample must start at t=0".into()));
        }
        for pair in samples.windows(2) {
            if pair[1].0.partial_cmp(&pair[0].0) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::InvalidTrace(format!(
                    "start times must be strictly increasing (t={} after t={})",
                    pair[1].0, pair[0].0
                )));
            }
        }
        if let Some(&(t, v)) = samples.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidTrace(format!(
                "throughput at t={t} must be positive, got {v}"
            )));
        }
        let last_start = samples[samples.len() - 1].0;
        if !(duration_s.is_finite() && duration_s > last_start) {
            return Err(Error::InvalidTrace(format!(
                "duration {duration_s} must exceed the last start time {last_start}"
            )));
        }
        Ok(Self {
            starts: samples.iter().map(|s| s.0).collect(),
            kbps: samples.iter().map(|s| s.1).collect(),
            duration_s,
            wrap,
        })
    }

    /// One-second bins, as in the trace file format.
    pub fn from_per_second(values: &[f64], wrap: bool) -> Result<Self> {
        let samples: Vec<(f64, f64)> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as f64, v))
            .collect();
        Self::new(&samples, values.len() as f64, wrap)
    }

    /// Parses the text format. `source_name` only labels error messages.
    pub fn parse(text: &str, source_name: &str, wrap: bool) -> Result<Self> {
        let values = parse_positive_lines(text, source_name)?;
        Self::from_per_second(&values, wrap)
    }

    pub fn load(path: impl AsRef<Path>, wrap: bool) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string(), wrap)
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }

    pub fn wraps(&self) -> bool {
        self.wrap
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.starts.iter().copied().zip(self.kbps.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.kbps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kbps.is_empty()
    }

    /// Time-weighted mean over one pass of the trace.
    pub fn mean_kbps(&self) -> f64 {
        let mut acc = 0.0;
        for (i, (&start, &v)) in self.starts.iter().zip(&self.kbps).enumerate() {
            let end = self.starts.get(i + 1).copied().unwrap_or(self.duration_s);
            acc += v * (end - start);
        }
        acc / self.duration_s
    }

    /// Network throughput at time `t`. Bin boundaries belong to the bin on
    /// their right.
    pub fn throughput_at(&self, t: f64) -> f64 {
        let (idx, _) = self.locate(t);
        self.kbps[idx]
    }

    /// Bin index containing `t` and the absolute start of the trace cycle
    /// that contains it.
    fn locate(&self, t: f64) -> (usize, f64) {
        let t = t.max(0.0);
        let (local, cycle_start) = if self.wrap && t >= self.duration_s {
            let cycles = (t / self.duration_s).floor();
            let mut local = t - cycles * self.duration_s;
            let mut cycle_start = cycles * self.duration_s;
            // guard against rounding pushing `local` just outside [0, D)
            if local >= self.duration_s {
                local -= self.duration_s;
                cycle_start += self.duration_s;
            } else if local < 0.0 {
                local += self.duration_s;
                cycle_start -= self.duration_s;
            }
            (local, cycle_start)
        } else {
            (t, 0.0)
        };
        let idx = self.starts.partition_point(|&s| s <= local).max(1) - 1;
        (idx, cycle_start)
    }

    /// Constant-rate pieces of the trace from `t` onwards, as
    /// `(piece_start, piece_end, kbps)`. The first piece starts at `t`; the
    /// iterator is infinite (the last piece of a non-wrapping trace has an
    /// infinite end).
    pub fn pieces_from(&self, t: f64) -> TracePieces<'_> {
        let (idx, cycle_start) = self.locate(t);
        TracePieces {
            trace: self,
            idx,
            cycle_start,
            cursor: t.max(0.0),
        }
    }

    /// Writes the per-second text format. Only meaningful for traces built
    /// from one-second bins.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.kbps {
            let _ = writeln!(out, "{v}");
        }
        out
    }
}

/// Iterator returned by [`ThroughputTrace::pieces_from`].
pub struct TracePieces<'a> {
    trace: &'a ThroughputTrace,
    idx: usize,
    cycle_start: f64,
    cursor: f64,
}

impl Iterator for TracePieces<'_> {
    type Item = (f64, f64, f64);

    fn next(&mut self) -> Option<Self::Item> {
        let tr = self.trace;
        let rate = tr.kbps[self.idx];
        let last = self.idx + 1 == tr.kbps.len();
        let end = if last {
            if tr.wrap {
                self.cycle_start + tr.duration_s
            } else {
                f64::INFINITY
            }
        } else {
            self.cycle_start + tr.starts[self.idx + 1]
        };
        let piece = (self.cursor, end.max(self.cursor), rate);
        if last {
            if tr.wrap {
                self.idx = 0;
                self.cycle_start += tr.duration_s;
            }
        } else {
            self.idx += 1;
        }
        self.cursor = piece.1;
        Some(piece)
    }
}

/// Intended per-video watch times, in playback order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTrace {
    watch_durations_s: Vec<f64>,
    /// Free-form description of how the trace was produced.
    #[serde(default)]
    provenance: Option<String>,
}

impl UserTrace {
    pub fn new(watch_durations_s: Vec<f64>) -> Result<Self> {
        if watch_durations_s.is_empty() {
            return Err(Error::EmptyTrace("user trace".into()));
        }
        if let Some((i, d)) = watch_durations_s
            .iter()
            .enumerate()
            .find(|(_, d)| !(d.is_finite() && **d > 0.0))
        {
            return Err(Error::InvalidTrace(format!(
                "watch duration #{} must be positive, got {d}",
                i + 1
            )));
        }
        Ok(Self {
            watch_durations_s,
            provenance: None,
        })
    }

    /// A leading `#` comment line becomes the provenance.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let values = parse_positive_lines(text, source_name)?;
        let mut trace = Self::new(values)?;
        trace.provenance = text
            .lines()
            .next()
            .and_then(|l| l.trim().strip_prefix('#'))
            .map(|c| c.trim().to_owned());
        Ok(trace)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut trace = Self::parse(&text, &path.display().to_string())?;
        if trace.provenance.is_none() {
            trace.provenance = Some(format!("file {}", path.display()));
        }
        Ok(trace)
    }

    pub fn durations(&self) -> &[f64] {
        &self.watch_durations_s
    }

    pub fn len(&self) -> usize {
        self.watch_durations_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.watch_durations_s.is_empty()
    }

    pub fn total_s(&self) -> f64 {
        self.watch_durations_s.iter().sum()
    }

    pub fn provenance(&self) -> Option<&str> {
        self.provenance.as_deref()
    }

    /// Text format, with the provenance as a leading comment.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(p) = &self.provenance {
            let _ = writeln!(out, "# {p}");
        }
        for d in &self.watch_durations_s {
            let _ = writeln!(out, "{d}");
        }
        out
    }
}

/// Draws i.i.d. Gaussian watch times until their sum first reaches
/// `total_s`. Non-positive draws are discarded and redrawn.
///
/// Panics if `mean_s <= 0`, `stddev_s < 0`, or `total_s <= 0`.
pub fn generate_user_trace(mean_s: f64, stddev_s: f64, total_s: f64, seed: u64) -> UserTrace {
    assert!(mean_s > 0.0 && mean_s.is_finite(), "mean must be positive");
    assert!(stddev_s >= 0.0 && stddev_s.is_finite(), "stddev must be non-negative");
    assert!(total_s > 0.0 && total_s.is_finite(), "total must be positive");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(mean_s, stddev_s).expect("validated parameters");
    let mut durations = Vec::new();
    let mut sum = 0.0;
    while sum < total_s {
        let draw = loop {
            let x: f64 = normal.sample(&mut rng);
            if x > 0.0 {
                break x;
            }
        };
        sum += draw;
        durations.push(draw);
    }
    UserTrace {
        watch_durations_s: durations,
        provenance: Some(format!(
            "gaussian mean={mean_s} std={stddev_s} total={total_s} seed={seed} nonpositive=redraw rng=chacha8"
        )),
    }
}

/// One per-segment throughput measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputSample {
    pub completion_s: f64,
    pub kbps: f64,
}

/// What the client has measured so far, one entry per completed segment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ThroughputSampleLog {
    samples: Vec<ThroughputSample>,
    total_kbps: f64,
}

impl ThroughputSampleLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a sample. Completion times must not go backwards and the
    /// measured rate must be positive.
    pub fn push(&mut self, completion_s: f64, kbps: f64) -> Result<()> {
        if !(kbps.is_finite() && kbps > 0.0) {
            return Err(Error::InvalidTrace(format!(
                "measured throughput must be positive, got {kbps}"
            )));
        }
        if let Some(last) = self.samples.last() {
            if completion_s < last.completion_s {
                return Err(Error::InvalidTrace(format!(
                    "sample at t={completion_s} precedes t={}",
                    last.completion_s
                )));
            }
        }
        self.samples.push(ThroughputSample { completion_s, kbps });
        self.total_kbps += kbps;
        Ok(())
    }

    pub fn samples(&self) -> &[ThroughputSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of every sample recorded so far.
    pub fn global_mean(&self) -> Option<f64> {
        (!self.samples.is_empty()).then(|| self.total_kbps / self.samples.len() as f64)
    }
}

/// Mean measured throughput over the window `(now - window_s, now]`.
///
/// Falls back to the mean of all samples when the window is empty, and
/// returns `None` (no measurement yet) when the log is empty.
pub fn average_throughput(log: &ThroughputSampleLog, now: f64, window_s: f64) -> Option<f64> {
    let samples = log.samples();
    if samples.is_empty() {
        return None;
    }
    let lo = now - window_s + WINDOW_EPSILON;
    let hi = now + WINDOW_EPSILON;
    let begin = samples.partition_point(|s| s.completion_s <= lo);
    let end = samples.partition_point(|s| s.completion_s <= hi);
    if begin >= end {
        return log.global_mean();
    }
    let window = &samples[begin..end];
    Some(window.iter().map(|s| s.kbps).sum::<f64>() / window.len() as f64)
}

fn parse_positive_lines(text: &str, source_name: &str) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| Error::TraceParse {
            source_name: source_name.to_owned(),
            line: i + 1,
            reason,
        };
        let v: f64 = line
            .parse()
            .map_err(|_| err(format!("not a number: {line:?}")))?;
        if !(v.is_finite() && v > 0.0) {
            return Err(err(format!("value must be positive, got {line}")));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::EmptyTrace(source_name.to_owned()));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_three_lines_as_one_second_bins() {
        let tr = ThroughputTrace::parse("4500\n4600\n4400\n", "t", true).unwrap();
        let samples: Vec<_> = tr.samples().collect();
        assert_eq!(samples, vec![(0.0, 4500.0), (1.0, 4600.0), (2.0, 4400.0)]);
        assert_eq!(tr.duration_s(), 3.0);
    }

    #[test]
    fn parse_error_cites_line() {
        let err = ThroughputTrace::parse("4500\nabc\n", "x.txt", true).unwrap_err();
        match err {
            Error::TraceParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_to_string("4500\nabc\n").contains("x.txt:2"));
    }

    fn err_to_string(text: &str) -> String {
        ThroughputTrace::parse(text, "x.txt", true)
            .unwrap_err()
            .to_string()
    }

    #[test]
    fn zero_and_empty_are_rejected() {
        assert!(matches!(
            ThroughputTrace::parse("100\n0\n", "z", true),
            Err(Error::TraceParse { line: 2, .. })
        ));
        assert!(matches!(
            ThroughputTrace::parse("# only a comment\n\n", "e", true),
            Err(Error::EmptyTrace(_))
        ));
        assert!(ThroughputTrace::parse("-5\n", "n", true).is_err());
    }

    #[test]
    fn comments_are_skipped() {
        let tr = ThroughputTrace::parse("# header\n1000\n# mid\n2000\n", "c", false).unwrap();
        assert_eq!(tr.len(), 2);
        assert_eq!(tr.throughput_at(1.5), 2000.0);
    }

    #[test]
    fn two_hundred_lines_give_two_hundred_seconds() {
        let text: String = (0..200).map(|i| format!("{}\n", 1000 + i)).collect();
        let tr = ThroughputTrace::parse(&text, "long", true).unwrap();
        assert_eq!(tr.duration_s(), 200.0);
    }

    #[test]
    fn lookup_is_piecewise_constant() {
        let tr = ThroughputTrace::new(&[(0.0, 1000.0), (1.0, 4000.0)], 2.0, false).unwrap();
        assert_eq!(tr.throughput_at(0.5), 1000.0);
        assert_eq!(tr.throughput_at(1.0), 4000.0);
        assert_eq!(tr.throughput_at(0.0), 1000.0);
        // holds the last value without wrap
        assert_eq!(tr.throughput_at(50.0), 4000.0);
    }

    #[test]
    fn wrap_indexes_modulo_duration() {
        let values: Vec<f64> = (0..200).map(|i| 100.0 + i as f64).collect();
        let tr = ThroughputTrace::from_per_second(&values, true).unwrap();
        assert_eq!(tr.throughput_at(205.0), tr.throughput_at(5.0));
        assert_eq!(tr.throughput_at(205.0), 105.0);
        assert_eq!(tr.throughput_at(399.5), 299.0);
    }

    #[test]
    fn constructor_rejects_bad_samples() {
        assert!(ThroughputTrace::new(&[(0.5, 1.0)], 2.0, true).is_err());
        assert!(ThroughputTrace::new(&[(0.0, 1.0), (0.0, 2.0)], 2.0, true).is_err());
        assert!(ThroughputTrace::new(&[(0.0, 1.0)], 0.0, true).is_err());
        assert!(ThroughputTrace::new(&[], 1.0, true).is_err());
    }

    #[test]
    fn pieces_cover_time_contiguously() {
        let tr = ThroughputTrace::from_per_second(&[1.0, 2.0, 3.0], true).unwrap();
        let pieces: Vec<_> = tr.pieces_from(1.5).take(5).collect();
        assert_eq!(
            pieces,
            vec![
                (1.5, 2.0, 2.0),
                (2.0, 3.0, 3.0),
                (3.0, 4.0, 1.0),
                (4.0, 5.0, 2.0),
                (5.0, 6.0, 3.0)
            ]
        );
        let flat = ThroughputTrace::from_per_second(&[1.0, 2.0], false).unwrap();
        let pieces: Vec<_> = flat.pieces_from(0.0).take(2).collect();
        assert_eq!(pieces[1], (1.0, f64::INFINITY, 2.0));
    }

    #[test]
    fn zero_variance_user_trace() {
        let tr = generate_user_trace(10.0, 0.0, 30.0, 1234);
        assert_eq!(tr.durations(), &[10.0, 10.0, 10.0]);
        let body: String = tr
            .to_text()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| format!("{l}\n"))
            .collect();
        assert_eq!(body, "10\n10\n10\n");
    }

    #[test]
    fn user_trace_text_round_trips() {
        let tr = generate_user_trace(12.0, 6.0, 180.0, 7);
        let back = UserTrace::parse(&tr.to_text(), "rt").unwrap();
        assert_eq!(back.durations(), tr.durations());
    }

    #[test]
    fn user_trace_rejects_non_positive() {
        assert!(UserTrace::new(vec![1.0, 0.0]).is_err());
        assert!(UserTrace::new(vec![]).is_err());
        assert!(UserTrace::parse("3\n-1\n", "u").is_err());
    }

    #[test]
    fn window_mean() {
        let mut log = ThroughputSampleLog::new();
        assert_eq!(average_throughput(&log, 0.0, 10.0), None);
        log.push(1.0, 4000.0).unwrap();
        log.push(5.0, 2000.0).unwrap();
        assert_eq!(average_throughput(&log, 6.0, 10.0), Some(3000.0));
        // only the second sample is inside (2, 6]
        assert_eq!(average_throughput(&log, 6.0, 4.0), Some(2000.0));
        // empty window falls back to the global mean
        assert_eq!(average_throughput(&log, 100.0, 10.0), Some(3000.0));
    }

    #[test]
    fn window_lower_bound_is_open() {
        let mut log = ThroughputSampleLog::new();
        log.push(2.0, 2500.0).unwrap();
        log.push(4.0, 1000.0).unwrap();
        assert_eq!(average_throughput(&log, 3.0, 10.0), Some(2500.0));
        // at now = 12 the sample at t = 2 has just left (2, 12]
        assert_eq!(average_throughput(&log, 12.0, 10.0), Some(1000.0));
    }

    #[test]
    fn sample_log_rejects_regression() {
        let mut log = ThroughputSampleLog::new();
        log.push(2.0, 1.0).unwrap();
        assert!(log.push(1.0, 1.0).is_err());
        assert!(log.push(3.0, 0.0).is_err());
    }
}
