//! Trace replay: one client per trip, each following its request plan on a
//! compressed timeline.

use std::sync::Arc;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use super::stats::LatencyReport;
use super::trace::TraceRecord;
use crate::analyzer::{Observation, Transcript};
use crate::api::{LtcaApi, PcaApi};
use crate::clock::{Clock, ReplayClock};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::model::{PolicyConfig, PolicyKind, DEFAULT_SKEW_TOLERANCE};
use crate::registry::Registry;
use crate::vehicle::{plan_requests_with_lead, RequestPlan, Vehicle};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayConfig {
    /// Trace seconds per wall second.
    pub compression: f64,
    pub concurrency: usize,
    /// Seconds before each follow-up interval at which it is requested.
    pub lead: u64,
    /// Fraction of failed trips above which the run is invalid.
    pub failure_budget: f64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig { compression: 1.0, concurrency: 512, lead: 0, failure_budget: 0.01 }
    }
}

/// Freshness tolerance, in trace seconds, giving clients the usual wall-time
/// slack under `compression`.
pub fn scaled_skew(compression: f64) -> u64 {
    (DEFAULT_SKEW_TOLERANCE as f64 * compression.max(1.0)).ceil() as u64
}

#[derive(Clone)]
pub struct Endpoints {
    pub ltca: Arc<dyn LtcaApi>,
    pub pca: Arc<dyn PcaApi>,
    pub registry: Arc<Registry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RequestOutcome {
    pub request_time: u64,
    pub interval: Interval,
    pub expected: usize,
    pub obtained: usize,
    pub latency_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TripOutcome {
    pub vehicle_id: String,
    pub departure: u64,
    pub trip_end: u64,
    pub requests: Vec<RequestOutcome>,
    pub obtained: usize,
    /// Pseudonyms whose slot starts before the trip ends.
    pub used: usize,
    /// Pseudonyms whose slot starts at or after the trip end.
    pub unused: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Utilization {
    pub trips: usize,
    pub requests: usize,
    pub issued: usize,
    pub used: usize,
    pub unused: usize,
    pub mean_per_request: f64,
    pub mean_unused_per_trip: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayReport {
    pub policy: PolicyConfig,
    pub compression: f64,
    pub latency: LatencyReport,
    pub utilization: Utilization,
    pub failures: usize,
    pub invalid: bool,
    pub trips: Vec<TripOutcome>,
    #[serde(skip)]
    pub transcript: Transcript,
}

/// Per-trip plans; depends only on the trace and policy.
pub fn plan_all(trace: &[TraceRecord], policy: &PolicyConfig, lead: u64) -> Result<Vec<RequestPlan>> {
    trace.iter().map(|r| plan_requests_with_lead(policy, r.departure, r.trip_duration, lead)).collect()
}

pub fn trace_origin(trace: &[TraceRecord]) -> u64 {
    trace.iter().map(|r| r.departure).min().unwrap_or(0)
}

struct TripRun {
    outcome: TripOutcome,
    observations: Vec<(Observation, String)>,
    samples: Vec<f64>,
}

async fn run_trip(
    record: TraceRecord,
    plan: RequestPlan,
    mut vehicle: Vehicle,
    ep: Endpoints,
    clock: Arc<ReplayClock>,
    permits: Arc<Semaphore>,
) -> TripRun {
    let mut run = TripRun {
        outcome: TripOutcome {
            vehicle_id: record.vehicle_id.clone(),
            departure: record.departure,
            trip_end: record.end(),
            requests: Vec::new(),
            obtained: 0,
            used: 0,
            unused: 0,
            error: None,
        },
        observations: Vec::new(),
        samples: Vec::new(),
    };
    for entry in &plan.entries {
        tokio::time::sleep(clock.until(entry.request_time)).await;
        let Ok(_permit) = permits.acquire().await else { break };
        match vehicle.acquire(entry, ep.ltca.as_ref(), ep.pca.as_ref()).await {
            Ok(acq) => {
                let latency_ms = (!acq.skipped()).then_some(acq.latency.as_secs_f64() * 1000.0);
                run.samples.extend(latency_ms);
                for p in &acq.pseudonyms {
                    if p.validity.start < record.end() {
                        run.outcome.used += 1;
                    } else {
                        run.outcome.unused += 1;
                    }
                    let obs = Observation { serial: p.serial, start: p.validity.start, end: p.validity.end };
                    run.observations.push((obs, record.vehicle_id.clone()));
                }
                run.outcome.obtained += acq.pseudonyms.len();
                run.outcome.requests.push(RequestOutcome {
                    request_time: entry.request_time,
                    interval: entry.interval,
                    expected: entry.expected_slot_count,
                    obtained: acq.pseudonyms.len(),
                    latency_ms,
                });
            }
            Err(e) => {
                warn!("{}: acquisition for {} failed: {e}", record.vehicle_id, entry.interval);
                run.outcome.error = Some(e.to_string());
                break;
            }
        }
    }
    run
}

pub async fn replay(
    trace: &[TraceRecord],
    policy: PolicyConfig,
    ep: &Endpoints,
    clock: Arc<ReplayClock>,
    cfg: &ReplayConfig,
) -> Result<ReplayReport> {
    if !(cfg.compression >= 1.0) {
        return Err(Error::InvalidArgument("compression must be at least 1".into()));
    }
    if cfg.concurrency == 0 {
        return Err(Error::InvalidArgument("concurrency must be positive".into()));
    }
    let plans = plan_all(trace, &policy, cfg.lead)?;

    let mut vehicles = Vec::with_capacity(trace.len());
    for (record, plan) in trace.iter().zip(&plans) {
        let dyn_clock: Arc<dyn Clock> = clock.clone();
        let mut v = Vehicle::register(record.vehicle_id.as_str(), policy, ep.registry.clone(), dyn_clock, ep.ltca.as_ref()).await?;
        v.pool_mut().fill(plan.total_slots())?;
        vehicles.push(v);
    }
    info!("replaying {} trips under {} at {}x", trace.len(), policy.policy, cfg.compression);

    clock.start();
    let permits = Arc::new(Semaphore::new(cfg.concurrency));
    let mut tasks = Vec::with_capacity(trace.len());
    for ((record, plan), vehicle) in trace.iter().cloned().zip(plans).zip(vehicles) {
        tasks.push(tokio::spawn(run_trip(record, plan, vehicle, ep.clone(), clock.clone(), permits.clone())));
    }

    let mut runs = Vec::with_capacity(tasks.len());
    for t in tasks {
        runs.push(t.await.map_err(|e| Error::Fatal(format!("replay task panicked: {e}")))?);
    }

    let mut samples = Vec::new();
    let mut transcript = Transcript::default();
    let mut trips = Vec::with_capacity(runs.len());
    let mut u = Utilization { trips: runs.len(), ..Default::default() };
    for run in runs {
        samples.extend(run.samples);
        for (obs, vid) in run.observations {
            transcript.ground_truth.insert(obs.serial, vid);
            transcript.observations.push(obs);
        }
        u.requests += run.outcome.requests.iter().filter(|r| r.obtained > 0).count();
        u.issued += run.outcome.obtained;
        u.used += run.outcome.used;
        u.unused += run.outcome.unused;
        trips.push(run.outcome);
    }
    transcript.sort();
    if u.requests > 0 {
        u.mean_per_request = u.issued as f64 / u.requests as f64;
    }
    if u.trips > 0 {
        u.mean_unused_per_trip = u.unused as f64 / u.trips as f64;
    }
    let failures = trips.iter().filter(|t| t.error.is_some()).count();
    let invalid = failures as f64 > cfg.failure_budget * trips.len() as f64;
    if invalid {
        warn!("{failures} of {} trips failed; run is invalid", trips.len());
    }
    Ok(ReplayReport {
        policy,
        compression: cfg.compression,
        latency: LatencyReport::from_samples(samples),
        utilization: u,
        failures,
        invalid,
        trips,
        transcript,
    })
}

/// Slots that cover `[trip_end, last_interval_end)` under a P2 or P3 plan.
pub fn analytic_unused(policy: &PolicyConfig, plan: &RequestPlan, trip_end: u64) -> usize {
    if policy.policy == PolicyKind::P1 {
        return 0;
    }
    plan.entries
        .iter()
        .flat_map(|e| crate::slots::tile(e.interval, policy.tau_seconds))
        .filter(|s| s.start >= trip_end)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::deploy::{Deployment, DomainSpec};
    use crate::harness::trace::{synthesize_trace, ArrivalDist, DurationDist};

    #[tokio::test(flavor = "multi_thread", worker_threads = 2)]
    async fn small_p2_replay_conserves() {
        let trace = synthesize_trace(20, DurationDist::Exponential { mean: 400.0 }, ArrivalDist::Uniform { start: 10_000, span: 300 }, 5).unwrap();
        let policy = PolicyConfig::new(PolicyKind::P2, 300, 30).unwrap();
        let compression = 100.0;
        let clock = Arc::new(ReplayClock::new(trace_origin(&trace), compression));
        let mut spec = DomainSpec::new("home", policy);
        spec.skew_tolerance = scaled_skew(compression);
        let dep = Deployment::build(&[spec], clock.clone()).unwrap();
        let ep = Endpoints { ltca: dep.home().ltca.clone(), pca: dep.home().pca.clone(), registry: dep.registry.clone() };
        let cfg = ReplayConfig { compression, ..Default::default() };
        let report = replay(&trace, policy, &ep, clock, &cfg).await.unwrap();
        assert_eq!(report.failures, 0, "{:?}", report.trips.iter().find_map(|t| t.error.clone()));
        let u = &report.utilization;
        assert_eq!(u.issued, dep.home().pca.issued_count());
        assert_eq!(u.issued, u.used + u.unused);
        let plans = plan_all(&trace, &policy, 0).unwrap();
        for ((t, p), r) in report.trips.iter().zip(&plans).zip(&trace) {
            assert_eq!(t.unused, analytic_unused(&policy, p, r.end()));
            assert!(t.requests.iter().all(|q| q.obtained == 10));
        }
    }
}
