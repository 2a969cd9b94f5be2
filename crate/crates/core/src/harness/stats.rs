//! Latency aggregates over raw samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
    pub std_dev: f64,
    pub p95: f64,
    /// Smallest sample `x` with `Pr{t <= x} >= 0.99`.
    pub p99: f64,
}

/// Nearest-rank percentile of an ascending slice, `q` in (0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl Aggregates {
    pub fn of(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("no samples".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sample".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mean = sorted.iter().sum::<f64>() / n;
        let variance = sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Ok(Aggregates {
            count: sorted.len(),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            mean,
            variance,
            std_dev: variance.sqrt(),
            p95: percentile(&sorted, 0.95),
            p99: percentile(&sorted, 0.99),
        })
    }
}

/// Raw samples, in milliseconds, with their aggregates.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LatencyReport {
    pub samples_ms: Vec<f64>,
    pub aggregates: Option<Aggregates>,
}

impl LatencyReport {
    pub fn from_samples(samples_ms: Vec<f64>) -> Self {
        let aggregates = Aggregates::of(&samples_ms).ok();
        LatencyReport { samples_ms, aggregates }
    }

    pub fn p99(&self) -> f64 {
        self.aggregates.as_ref().map_or(f64::NAN, |a| a.p99)
    }

    pub fn p95(&self) -> f64 {
        self.aggregates.as_ref().map_or(f64::NAN, |a| a.p95)
    }

    pub fn mean(&self) -> f64 {
        self.aggregates.as_ref().map_or(f64::NAN, |a| a.mean)
    }

    /// `index,latency_ms` rows.
    pub fn samples_csv(&self) -> String {
        let mut out = String::from("index,latency_ms\n");
        for (i, s) in self.samples_ms.iter().enumerate() {
            out.push_str(&format!("{i},{s}\n"));
        }
        out
    }
}
