//! Trace-driven simulation of segment prefetching for short-form video
//! streaming.
//!
//! The crate models a user scrolling through a playlist of short videos
//! while a single downloader fetches fixed-duration segments over a
//! time-varying network. Three prefetch policies are provided:
//!
//! - **network-aware**: keeps a throughput-dependent number of segments
//!   buffered for the current video and tops up a throughput-dependent
//!   number of upcoming videos;
//! - **next-one**: downloads the current video fully, then the next one;
//! - **waterfall**: like next-one, but two videos ahead.
//!
//! Sessions report waste (buffered but unwatched seconds), start-up delay,
//! and re-buffering time, and can be compared across policies and traces
//! with [`experiment::run_matrix`].
//!
//! ```
//! use scrollfetch::model::{Playlist, SessionConfig};
//! use scrollfetch::policy::{Policy, PolicyKind};
//! use scrollfetch::sim::simulate_session;
//! use scrollfetch::traces::{generate_user_trace, ThroughputTrace};
//!
//! let user = generate_user_trace(6.0, 3.0, 60.0, 7);
//! let playlist = Playlist::uniform(user.len(), 2000.0, 15.0, 1.0).unwrap();
//! let network = ThroughputTrace::from_per_second(&[4500.0, 4200.0, 4800.0], true).unwrap();
//! let policy = Policy::from_kind(PolicyKind::NetworkAware);
//! let out = simulate_session(&playlist, &network, &user, &policy, &SessionConfig::default()).unwrap();
//! assert!(out.metrics.totals.waste_s >= 0.0);
//! ```

pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod policy;
pub mod sim;
pub mod traces;

pub use error::{Error, Result};

/// Tolerance for time and buffer comparisons, seconds.
pub const TIME_EPSILON: f64 = 1e-9;
