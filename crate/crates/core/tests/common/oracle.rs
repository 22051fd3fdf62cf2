//! Brute-force reference timeline for small sessions.
//!
//! Shares no code with the engine beyond the event record type. Time moves
//! from one candidate instant to the next, where candidates include every
//! throughput bin edge, every crossing of a whole number of segments by the
//! current buffer, and every instant a throughput sample leaves the
//! averaging window. The policy rules are re-derived here from their
//! tables and asked again at each of those instants whenever the downloader
//! is free.

use scrollfetch::sim::{EventKind, EventRecord};

const EPS: f64 = 1e-9;
const KBPS_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OraclePolicy {
    NetworkAware,
    /// Fill the current video, then this many following videos in order.
    InOrder(usize),
}

#[derive(Debug, Clone)]
pub struct OracleCase {
    pub bitrate_kbps: f64,
    pub tau_s: f64,
    pub segments: Vec<u32>,
    pub watch_s: Vec<f64>,
    /// Throughput per one-second bin, repeating.
    pub bins_kbps: Vec<f64>,
    pub startup_segments: u32,
    pub window_s: f64,
    pub policy: OraclePolicy,
    pub residual_as_waste: bool,
}

#[derive(Debug, Clone, Default)]
pub struct OracleTotals {
    pub downloaded_s: f64,
    pub watched_s: f64,
    pub waste_s: f64,
    pub residual_s: f64,
    pub startup_s: f64,
    pub rebuffer_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Waiting(f64),
    Playing,
    Stalled(f64),
}

struct Job {
    video: usize,
    segment: u32,
    remaining_kbit: f64,
    started: f64,
}

fn rate_at(bins: &[f64], t: f64) -> f64 {
    let i = (t + EPS).floor() as usize % bins.len();
    bins[i]
}

fn next_bin_edge(t: f64) -> f64 {
    (t + EPS).floor() + 1.0
}

fn b1_rows(alpha: Option<f64>, r: f64) -> u32 {
    match alpha {
        None => 4,
        Some(a) if a <= 1.5 * r + KBPS_EPS => 4,
        Some(a) if a <= 2.5 * r + KBPS_EPS => 3,
        Some(_) => 2,
    }
}

fn k_rows(alpha: Option<f64>, r: f64) -> u32 {
    match alpha {
        None => 7,
        Some(a) if a <= 1.5 * r + KBPS_EPS => 7,
        Some(a) if a <= 2.0 * r + KBPS_EPS => 4,
        Some(a) if a <= 2.5 * r + KBPS_EPS => 7,
        Some(_) => 12,
    }
}

struct World<'a> {
    case: &'a OracleCase,
    t: f64,
    cur: usize,
    playhead: f64,
    phase: Phase,
    buf: Vec<f64>,
    segs: Vec<u32>,
    job: Option<Job>,
    samples: Vec<(f64, f64)>,
    events: Vec<EventRecord>,
    totals: OracleTotals,
}

fn ev(t: f64, kind: EventKind) -> EventRecord {
    EventRecord {
        t,
        kind,
        video: None,
        segment: None,
        buffer_s: None,
        value: None,
    }
}

impl World<'_> {
    fn stop(&self) -> f64 {
        let len = self.case.segments[self.cur] as f64 * self.case.tau_s;
        self.case.watch_s[self.cur].min(len)
    }

    fn complete(&self, v: usize) -> bool {
        self.segs[v] >= self.case.segments[v]
    }

    fn alpha(&self) -> Option<f64> {
        if self.samples.is_empty() {
            return None;
        }
        let inside: Vec<f64> = self
            .samples
            .iter()
            .filter(|(c, _)| *c > self.t - self.case.window_s + EPS && *c <= self.t + EPS)
            .map(|(_, k)| *k)
            .collect();
        let pool: Vec<f64> = if inside.is_empty() {
            self.samples.iter().map(|(_, k)| *k).collect()
        } else {
            inside
        };
        Some(pool.iter().sum::<f64>() / pool.len() as f64)
    }

    fn decide(&self) -> Option<usize> {
        let n = self.case.segments.len();
        let tau = self.case.tau_s;
        match self.case.policy {
            OraclePolicy::InOrder(look) => (self.cur..n.min(self.cur + look + 1)).find(|&v| !self.complete(v)),
            OraclePolicy::NetworkAware => {
                let a = self.alpha();
                let b1 = b1_rows(a, self.case.bitrate_kbps) as f64 * tau;
                let k = k_rows(a, self.case.bitrate_kbps) as usize;
                let draining = self.phase == Phase::Playing;
                let b = self.buf[self.cur];
                let below = if draining { b <= b1 + EPS } else { b < b1 - EPS };
                if !self.complete(self.cur) && below {
                    return Some(self.cur);
                }
                (1..=k)
                    .map(|j| self.cur + j)
                    .take_while(|&v| v < n)
                    .find(|&v| !self.complete(v) && self.buf[v] < b1 - EPS)
            }
        }
    }

    fn advance(&mut self, to: f64) {
        let dt = to - self.t;
        if let Some(job) = &mut self.job {
            job.remaining_kbit -= rate_at(&self.case.bins_kbps, self.t) * dt;
        }
        match self.phase {
            Phase::Playing => {
                self.buf[self.cur] = (self.buf[self.cur] - dt).max(0.0);
                self.playhead += dt;
            }
            Phase::Stalled(_) => self.totals.rebuffer_s += dt,
            Phase::Waiting(_) => {}
        }
        self.t = to;
    }

    fn abort(&mut self) {
        if let Some(job) = self.job.take() {
            let size = self.case.bitrate_kbps * self.case.tau_s;
            let mut e = ev(self.t, EventKind::DownloadAbort);
            e.video = Some(job.video as u32 + 1);
            e.segment = Some(job.segment);
            e.buffer_s = Some(self.buf[job.video]);
            e.value = Some(size - job.remaining_kbit.max(0.0));
            self.events.push(e);
        }
    }

    /// Returns false once the session is over.
    fn scroll(&mut self) -> bool {
        let v = self.cur;
        let stop = self.stop();
        let waste = self.buf[v];
        self.totals.watched_s += stop;
        self.totals.waste_s += waste;
        self.buf[v] = 0.0;
        if self.job.as_ref().is_some_and(|j| j.video == v) {
            self.abort();
        }
        let mut e = ev(self.t, EventKind::Scroll);
        e.video = Some(v as u32 + 1);
        e.buffer_s = Some(waste);
        e.value = Some(stop);
        self.events.push(e);
        if v + 1 >= self.case.watch_s.len() {
            self.abort();
            for w in self.case.watch_s.len()..self.case.segments.len() {
                if self.case.residual_as_waste {
                    self.totals.waste_s += self.buf[w];
                } else {
                    self.totals.residual_s += self.buf[w];
                }
            }
            self.events.push(ev(self.t, EventKind::SessionEnd));
            return false;
        }
        self.cur = v + 1;
        self.playhead = 0.0;
        let need = self.case.startup_segments.min(self.case.segments[self.cur]);
        if self.segs[self.cur] >= need {
            self.phase = Phase::Playing;
            let mut e = ev(self.t, EventKind::PlaybackStart);
            e.video = Some(self.cur as u32 + 1);
            e.buffer_s = Some(self.buf[self.cur]);
            e.value = Some(0.0);
            self.events.push(e);
        } else {
            self.phase = Phase::Waiting(self.t);
        }
        true
    }

    fn finish_download(&mut self) {
        let job = self.job.take().expect("job");
        let tau = self.case.tau_s;
        let v = job.video;
        self.segs[v] += 1;
        self.buf[v] += tau;
        self.totals.downloaded_s += tau;
        let size = self.case.bitrate_kbps * tau;
        let kbps = size / (self.t - job.started);
        self.samples.push((self.t, kbps));
        let mut e = ev(self.t, EventKind::DownloadComplete);
        e.video = Some(v as u32 + 1);
        e.segment = Some(job.segment);
        e.buffer_s = Some(self.buf[v]);
        e.value = Some(kbps);
        self.events.push(e);
        if v != self.cur {
            return;
        }
        let need = self.case.startup_segments.min(self.case.segments[v]);
        match self.phase {
            Phase::Waiting(since) if self.segs[v] >= need => {
                self.totals.startup_s += self.t - since;
                self.phase = Phase::Playing;
                let mut e = ev(self.t, EventKind::PlaybackStart);
                e.video = Some(v as u32 + 1);
                e.buffer_s = Some(self.buf[v]);
                e.value = Some(self.t - since);
                self.events.push(e);
            }
            Phase::Stalled(since) => {
                self.phase = Phase::Playing;
                let mut e = ev(self.t, EventKind::StallEnd);
                e.video = Some(v as u32 + 1);
                e.buffer_s = Some(self.buf[v]);
                e.value = Some(self.t - since);
                self.events.push(e);
            }
            _ => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Next {
    Done,
    Stall,
    Scroll,
    Tick,
}

/// Runs the reference timeline and returns its event log and totals.
pub fn run_oracle(case: &OracleCase) -> (Vec<EventRecord>, OracleTotals) {
    let n = case.segments.len();
    let mut w = World {
        case,
        t: 0.0,
        cur: 0,
        playhead: 0.0,
        phase: Phase::Waiting(0.0),
        buf: vec![0.0; n],
        segs: vec![0; n],
        job: None,
        samples: Vec::new(),
        events: vec![ev(0.0, EventKind::SessionStart)],
        totals: OracleTotals::default(),
    };
    for _ in 0..1_000_000 {
        if w.job.is_none() {
            if let Some(v) = w.decide() {
                let mut e = ev(w.t, EventKind::DownloadStart);
                e.video = Some(v as u32 + 1);
                e.segment = Some(w.segs[v]);
                e.buffer_s = Some(w.buf[v]);
                w.events.push(e);
                w.job = Some(Job {
                    video: v,
                    segment: w.segs[v],
                    remaining_kbit: case.bitrate_kbps * case.tau_s,
                    started: w.t,
                });
            }
        }
        let mut cands: Vec<(f64, Next)> = vec![(next_bin_edge(w.t), Next::Tick)];
        if let Some(job) = &w.job {
            let rate = rate_at(&case.bins_kbps, w.t);
            let finish = w.t + job.remaining_kbit / rate;
            if finish <= next_bin_edge(w.t) + EPS {
                cands.push((finish, Next::Done));
            }
        }
        if w.phase == Phase::Playing {
            let left = w.stop() - w.playhead;
            let b = w.buf[w.cur];
            if left <= b + EPS {
                cands.push((w.t + left.max(0.0), Next::Scroll));
            } else {
                cands.push((w.t + b, Next::Stall));
            }
        }
        if w.job.is_none() {
            if w.phase == Phase::Playing {
                let b = w.buf[w.cur];
                let mut m = (b / case.tau_s).ceil() - 1.0;
                while m >= 0.0 && m * case.tau_s >= b - EPS {
                    m -= 1.0;
                }
                if m >= 0.0 {
                    cands.push((w.t + (b - m * case.tau_s), Next::Tick));
                }
            }
            for &(c, _) in &w.samples {
                if c + case.window_s > w.t + EPS {
                    cands.push((c + case.window_s, Next::Tick));
                }
            }
        }
        let (t, what) = cands
            .into_iter()
            .reduce(|a, b| {
                if b.0 < a.0 - EPS || ((b.0 - a.0).abs() <= EPS && b.1 < a.1) {
                    b
                } else {
                    a
                }
            })
            .expect("bin edge always present");
        w.advance(t);
        match what {
            Next::Done => w.finish_download(),
            Next::Stall => {
                w.buf[w.cur] = 0.0;
                w.phase = Phase::Stalled(w.t);
                let mut e = ev(w.t, EventKind::StallStart);
                e.video = Some(w.cur as u32 + 1);
                e.buffer_s = Some(0.0);
                w.events.push(e);
            }
            Next::Scroll => {
                if !w.scroll() {
                    return (w.events, w.totals);
                }
            }
            Next::Tick => {}
        }
    }
    panic!("oracle did not terminate");
}

/// First mismatch between two event logs, if any.
pub fn compare_logs(engine: &[EventRecord], oracle: &[EventRecord]) -> Option<String> {
    let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => (x - y).abs() <= EPS * x.abs().max(y.abs()).max(1.0),
        _ => false,
    };
    for (i, (e, o)) in engine.iter().zip(oracle).enumerate() {
        let same = e.kind == o.kind
            && e.video == o.video
            && e.segment == o.segment
            && (e.t - o.t).abs() <= EPS
            && close(e.buffer_s, o.buffer_s)
            && close(e.value, o.value);
        if !same {
            return Some(format!("event {i}: engine {e:?} oracle {o:?}"));
        }
    }
    (engine.len() != oracle.len())
        .then(|| format!("engine has {} events, oracle {}", engine.len(), oracle.len()))
}
