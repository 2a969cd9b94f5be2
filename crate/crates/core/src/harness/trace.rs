//! Mobility traces: one trip per row.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Epoch;

/// Mean trip durations of two public city-scale traces, seconds.
pub const LUST_MEAN_DURATION: f64 = 692.81;
pub const TAPAS_MEAN_DURATION: f64 = 590.49;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub vehicle_id: String,
    pub departure: Epoch,
    #[serde(rename = "duration")]
    pub trip_duration: u64,
}

impl TraceRecord {
    pub fn end(&self) -> Epoch {
        self.departure + self.trip_duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub count: usize,
    pub mean_duration: f64,
}

pub fn summarize(trace: &[TraceRecord]) -> TraceSummary {
    let n = trace.len();
    let mean = if n == 0 { 0.0 } else { trace.iter().map(|r| r.trip_duration as f64).sum::<f64>() / n as f64 };
    TraceSummary { count: n, mean_duration: mean }
}

/// Reads `vehicle_id,departure,duration` CSV.
pub fn ingest_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    parse_trace(file).map_err(|e| match e {
        Error::Decode { field, reason } => Error::decode(format!("{}:{field}", path.display()), reason),
        e => e,
    })
}

pub fn parse_trace(input: impl std::io::Read) -> Result<Vec<TraceRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers().map_err(|e| Error::decode("header", e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["vehicle_id", "departure", "duration"] {
        return Err(Error::decode("header", "expected vehicle_id,departure,duration"));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize::<TraceRecord>() {
        let rec = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::decode(format!("line {line}"), e.to_string())
        })?;
        if rec.trip_duration == 0 {
            return Err(Error::decode(format!("line {}", out.len() + 2), "trip duration must be positive"));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_trace(path: impl AsRef<Path>, trace: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for r in trace {
        w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DurationDist {
    Constant { seconds: u64 },
    Exponential { mean: f64 },
    /// Parameterized by the mean and standard deviation of the duration itself.
    LogNormal { mean: f64, std_dev: f64 },
}

impl DurationDist {
    pub fn lust() -> Self {
        DurationDist::Exponential { mean: LUST_MEAN_DURATION }
    }

    pub fn tapas() -> Self {
        DurationDist::Exponential { mean: TAPAS_MEAN_DURATION }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ArrivalDist {
    /// Departures uniform over `[start, start + span)`.
    Uniform { start: Epoch, span: u64 },
    /// Poisson process with `rate` departures per second from `start`.
    Poisson { start: Epoch, rate: f64 },
}

enum Sampler {
    Constant(u64),
    Exp(Exp<f64>),
    LogNormal(LogNormal<f64>),
}

impl Sampler {
    fn new(d: DurationDist) -> Result<Self> {
        let bad = |what: &str| Error::InvalidArgument(format!("invalid duration distribution: {what}"));
        Ok(match d {
            DurationDist::Constant { seconds: 0 } => return Err(bad("zero duration")),
            DurationDist::Constant { seconds } => Sampler::Constant(seconds),
            DurationDist::Exponential { mean } if mean.is_finite() && mean > 0.0 => {
                Sampler::Exp(Exp::new(1.0 / mean).map_err(|e| bad(&e.to_string()))?)
            }
            DurationDist::Exponential { .. } => return Err(bad("mean must be positive")),
            DurationDist::LogNormal { mean, std_dev } if mean > 0.0 && std_dev > 0.0 => {
                let s2 = (1.0 + (std_dev / mean).powi(2)).ln();
                let mu = mean.ln() - s2 / 2.0;
                Sampler::LogNormal(LogNormal::new(mu, s2.sqrt()).map_err(|e| bad(&e.to_string()))?)
            }
            DurationDist::LogNormal { .. } => return Err(bad("mean and std_dev must be positive")),
        })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        let x = match self {
            Sampler::Constant(s) => return *s,
            Sampler::Exp(d) => d.sample(rng),
            Sampler::LogNormal(d) => d.sample(rng),
        };
        (x.round() as u64).max(1)
    }
}

/// Reproducible synthetic trace.
pub fn synthesize_trace(n: usize, durations: DurationDist, arrivals: ArrivalDist, seed: u64) -> Result<Vec<TraceRecord>> {
    if n == 0 {
        return Err(Error::InvalidArgument("at least one vehicle".into()));
    }
    let dur = Sampler::new(durations)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut departures: Vec<Epoch> = match arrivals {
        ArrivalDist::Uniform { start, span } => {
            if span == 0 {
                return Err(Error::InvalidArgument("arrival span must be positive".into()));
            }
            let u = Uniform::new(0, span).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            (0..n).map(|_| start + u.sample(&mut rng)).collect()
        }
        ArrivalDist::Poisson { start, rate } => {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(Error::InvalidArgument("arrival rate must be positive".into()));
            }
            let gap = Exp::new(rate).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let mut t = 0.0;
            (0..n)
                .map(|_| {
                    t += gap.sample(&mut rng);
                    start + t as u64
                })
                .collect()
        }
    };
    departures.sort_unstable();
    Ok(departures
        .into_iter()
        .enumerate()
        .map(|(i, departure)| TraceRecord {
            vehicle_id: format!("v{i:06}"),
            departure,
            trip_duration: dur.sample(&mut rng),
        })
        .collect())
}
