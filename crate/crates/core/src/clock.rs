//! Time sources. Services and clients read time only through [`Clock`], so
//! tests can pin it and trace replays can run it faster than wall time.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};
use crate::model::Epoch;

pub trait Clock: Send + Sync + fmt::Debug {
    fn now(&self) -> Epoch;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Epoch {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
    }
}

/// Clock that only moves when told to.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(t: Epoch) -> Self {
        ManualClock(AtomicU64::new(t))
    }

    pub fn set(&self, t: Epoch) {
        self.0.store(t, Ordering::SeqCst);
    }

    pub fn advance(&self, secs: u64) {
        self.0.fetch_add(secs, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Epoch {
        self.0.load(Ordering::SeqCst)
    }
}

pub fn wall_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// Trace time running `factor` times faster than wall time from a shared
/// origin. Separate processes given the same three parameters agree on the
/// current trace time.
#[derive(Debug, Clone, Copy)]
pub struct SimClock {
    pub wall_origin_ms: u64,
    pub trace_origin: Epoch,
    pub factor: f64,
}

impl SimClock {
    pub fn new(wall_origin_ms: u64, trace_origin: Epoch, factor: f64) -> Self {
        SimClock { wall_origin_ms, trace_origin, factor: factor.max(f64::MIN_POSITIVE) }
    }

    /// Starts trace time `trace_origin` now.
    pub fn starting_now(trace_origin: Epoch, factor: f64) -> Self {
        Self::new(wall_ms(), trace_origin, factor)
    }

    /// Wall-clock instant (ms since the Unix epoch) at which trace time `t` begins.
    pub fn wall_ms_at(&self, t: Epoch) -> u64 {
        let offset = t.saturating_sub(self.trace_origin) as f64 * 1000.0 / self.factor;
        self.wall_origin_ms + offset.ceil() as u64
    }

    /// How long to wait from now until trace time `t`.
    pub fn until(&self, t: Epoch) -> Duration {
        Duration::from_millis(self.wall_ms_at(t).saturating_sub(wall_ms()))
    }
}

impl Clock for SimClock {
    fn now(&self) -> Epoch {
        let elapsed = wall_ms().saturating_sub(self.wall_origin_ms) as f64;
        self.trace_origin + (elapsed * self.factor / 1000.0).floor() as u64
    }
}

/// Trace clock that holds at `trace_origin` until started, so setup work
/// (registration, key pools) does not eat into the replayed timeline.
#[derive(Debug)]
pub struct ReplayClock {
    trace_origin: Epoch,
    factor: f64,
    started: OnceLock<SimClock>,
}

impl ReplayClock {
    pub fn new(trace_origin: Epoch, factor: f64) -> Self {
        ReplayClock { trace_origin, factor, started: OnceLock::new() }
    }

    /// Starts the timeline; later calls keep the first origin.
    pub fn start(&self) -> SimClock {
        *self.started.get_or_init(|| SimClock::starting_now(self.trace_origin, self.factor))
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }

    /// Wait until trace time `t`; zero if not started.
    pub fn until(&self, t: Epoch) -> Duration {
        self.started.get().map_or(Duration::ZERO, |c| c.until(t))
    }
}

impl Clock for ReplayClock {
    fn now(&self) -> Epoch {
        self.started.get().map_or(self.trace_origin, |c| c.now())
    }
}

/// Rejects request timestamps further than `tolerance` seconds from `now`.
pub fn check_freshness(timestamp: Epoch, now: Epoch, tolerance: u64) -> Result<()> {
    if timestamp.abs_diff(now) > tolerance {
        return Err(Error::Freshness(format!("timestamp {timestamp} is {}s from {now}", timestamp.abs_diff(now))));
    }
    Ok(())
}
