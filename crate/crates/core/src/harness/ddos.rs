//! Flooding the PCA with token-less pseudonym requests while honest vehicles
//! keep acquiring, over loopback HTTP.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::deploy::{Deployment, DomainSpec};
use super::stats::LatencyReport;
use crate::clock::{Clock, SystemClock};
use crate::crypto::{target_digest, KeyPair, RandomToken};
use crate::error::{Error, Result};
use crate::http::{ltca_router, pca_router, spawn_local, HttpLtca, HttpPca, ServerLimits};
use crate::interval::Interval;
use crate::model::{
    Envelope, MessageId, PolicyConfig, PolicyKind, PseudonymRequest, SelfSignedKey, SignedEnvelope, TicketRequest,
};
use crate::pca::puzzle::{PuzzleConfig, PuzzleMode};
use crate::vehicle::plan_requests;
use crate::wire::Wire;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DdosConfig {
    /// Attacker requests per second; 0 disables the attacker.
    pub bogus_rate: u32,
    /// The attacker sends its requests in bursts this far apart.
    pub burst_interval_ms: u64,
    pub puzzle: bool,
    pub difficulty: u8,
    pub legit_clients: usize,
    /// Gap between honest arrivals.
    pub legit_spacing_ms: u64,
    /// Distinct fresh requests the attacker cycles through.
    pub attacker_identities: usize,
    /// Attacker requests allowed in flight before new ones are dropped.
    pub max_outstanding: usize,
    pub policy: PolicyConfig,
    pub limits: ServerLimits,
}

impl Default for DdosConfig {
    fn default() -> Self {
        DdosConfig {
            bogus_rate: 1000,
            burst_interval_ms: 50,
            puzzle: true,
            difficulty: 5,
            legit_clients: 100,
            legit_spacing_ms: 20,
            attacker_identities: 20,
            max_outstanding: 2000,
            policy: PolicyConfig { policy: PolicyKind::P2, gamma_seconds: 600, tau_seconds: 60, grid_epoch: 0 },
            limits: ServerLimits::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DdosReport {
    pub config: DdosConfig,
    pub legit: LatencyReport,
    pub legit_failures: usize,
    pub legit_mean_puzzle_trips: f64,
    pub attacker_sent: usize,
    pub attacker_dropped: usize,
    pub attacker_issued: usize,
    pub attacker_puzzle_refusals: usize,
    pub attacker_other_refusals: usize,
    /// Attacker pseudonyms issued per second of attack.
    pub attacker_service_rate: f64,
    /// Honest pseudonyms issued per second per client.
    pub honest_per_client_rate: f64,
    pub wall_seconds: f64,
}

#[derive(Default)]
struct AttackCounters {
    sent: AtomicUsize,
    dropped: AtomicUsize,
    issued: AtomicUsize,
    puzzle: AtomicUsize,
    other: AtomicUsize,
    outstanding: AtomicUsize,
}

/// One fresh, fully valid request per attacker identity: each would be
/// served once if admitted.
fn attacker_requests(dep: &Deployment, n: usize, policy: &PolicyConfig) -> Result<Vec<Envelope<PseudonymRequest>>> {
    let home = dep.home();
    let now = dep.clock.now();
    let validity = Interval::new(now, now + policy.gamma_seconds)?;
    let slots = crate::slots::issuable(policy, validity, now)?.len();
    (0..n)
        .map(|i| {
            let key = KeyPair::generate()?;
            let ltc = home.ltca.register_vehicle(format!("attacker-{i}").into(), key.public_key().clone())?;
            let rnd_target = RandomToken::try_random()?;
            let req = TicketRequest { ltc, target_digest: target_digest(home.pca.id().as_str(), &rnd_target), validity };
            let env = SignedEnvelope::seal(Envelope::new(MessageId::TicketRequest, now, req), &key)?;
            let ticket = home.ltca.issue_ticket(&env)?.payload.ticket;
            let keys = (0..slots).map(|_| SelfSignedKey::create(&KeyPair::generate()?)).collect::<Result<_>>()?;
            Ok(Envelope::new(MessageId::PseudonymRequest, now, PseudonymRequest { ticket, rnd_target, validity, keys }))
        })
        .collect()
}

pub async fn ddos_run(cfg: &DdosConfig) -> Result<DdosReport> {
    if cfg.legit_clients == 0 {
        return Err(Error::InvalidArgument("at least one honest client".into()));
    }
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let mut spec = DomainSpec::new("home", cfg.policy);
    spec.puzzle = if cfg.puzzle {
        PuzzleConfig { mode: PuzzleMode::Always, difficulty: cfg.difficulty, ..PuzzleConfig::default() }
    } else {
        PuzzleConfig { mode: PuzzleMode::Off, ..PuzzleConfig::default() }
    };
    let dep = Deployment::build(&[spec], clock.clone())?;
    let home = dep.home().clone();
    let (ltca_addr, ltca_task) = spawn_local(ltca_router(home.ltca.clone(), &cfg.limits)).await?;
    let (pca_addr, pca_task) = spawn_local(pca_router(home.pca.clone(), &cfg.limits)).await?;
    let ltca = Arc::new(HttpLtca::new(home.ltca.id().clone(), &format!("http://{ltca_addr}")));
    let pca = Arc::new(HttpPca::new(home.pca.id().clone(), &format!("http://{pca_addr}")));

    let mut vehicles = Vec::with_capacity(cfg.legit_clients);
    for i in 0..cfg.legit_clients {
        let mut v = dep.vehicle(&format!("car-{i}"), "home").await?;
        v.pool_mut().fill((cfg.policy.gamma_seconds / cfg.policy.tau_seconds) as usize + 1)?;
        vehicles.push(v);
    }
    let bogus = Arc::new(if cfg.bogus_rate > 0 { attacker_requests(&dep, cfg.attacker_identities.max(1), &cfg.policy)? } else { Vec::new() });
    info!("ddos run: rate {} req/s, puzzle {}", cfg.bogus_rate, if cfg.puzzle { "on" } else { "off" });

    let started = Instant::now();
    let counters = Arc::new(AttackCounters::default());
    let stop = Arc::new(tokio::sync::Notify::new());
    let attacker = (cfg.bogus_rate > 0).then(|| {
        let (pca, counters, stop, bogus, clock) = (pca.clone(), counters.clone(), stop.clone(), bogus.clone(), clock.clone());
        let per_burst = ((cfg.bogus_rate as u64 * cfg.burst_interval_ms) / 1000).max(1) as usize;
        let interval = Duration::from_millis(cfg.burst_interval_ms.max(1));
        let max_outstanding = cfg.max_outstanding;
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(interval);
            let mut next = 0usize;
            loop {
                tokio::select! {
                    _ = stop.notified() => break,
                    _ = tick.tick() => {}
                }
                for _ in 0..per_burst {
                    counters.sent.fetch_add(1, Ordering::Relaxed);
                    if counters.outstanding.load(Ordering::Relaxed) >= max_outstanding {
                        counters.dropped.fetch_add(1, Ordering::Relaxed);
                        continue;
                    }
                    let mut env = bogus[next % bogus.len()].clone();
                    next += 1;
                    env.nonce = RandomToken::random();
                    env.timestamp = clock.now();
                    let (pca, counters) = (pca.clone(), counters.clone());
                    counters.outstanding.fetch_add(1, Ordering::Relaxed);
                    tokio::spawn(async move {
                        let slot = match pca.send_raw_pseudonym_request(&env.to_bytes()).await {
                            Ok(_) => &counters.issued,
                            Err(Error::PuzzleRequired(_)) => &counters.puzzle,
                            Err(_) => &counters.other,
                        };
                        slot.fetch_add(1, Ordering::Relaxed);
                        counters.outstanding.fetch_sub(1, Ordering::Relaxed);
                    });
                }
            }
        })
    });

    let mut honest = Vec::with_capacity(vehicles.len());
    for (i, mut v) in vehicles.into_iter().enumerate() {
        let (ltca, pca, clock) = (ltca.clone(), pca.clone(), clock.clone());
        let policy = cfg.policy;
        let delay = Duration::from_millis(cfg.legit_spacing_ms * i as u64);
        honest.push(tokio::spawn(async move {
            tokio::time::sleep(delay).await;
            let plan = plan_requests(&policy, clock.now(), policy.gamma_seconds)?;
            let acq = v.acquire(&plan.entries[0], ltca.as_ref(), pca.as_ref()).await?;
            Ok::<_, Error>((acq.latency, acq.puzzle_round_trips, acq.pseudonyms.len()))
        }));
    }
    let mut samples = Vec::new();
    let mut failures = 0;
    let mut trips = 0;
    let mut honest_issued = 0;
    let mut honest_time = 0.0;
    for h in honest {
        match h.await.map_err(|e| Error::Fatal(format!("client task panicked: {e}")))? {
            Ok((lat, t, n)) => {
                samples.push(lat.as_secs_f64() * 1000.0);
                trips += t;
                honest_issued += n;
                honest_time += lat.as_secs_f64();
            }
            Err(e) => {
                warn!("honest acquisition failed: {e}");
                failures += 1;
            }
        }
    }
    let attack_secs = started.elapsed().as_secs_f64();
    stop.notify_one();
    if let Some(a) = attacker {
        let _ = a.await;
        let deadline = Instant::now() + Duration::from_secs(10);
        while counters.outstanding.load(Ordering::Relaxed) > 0 && Instant::now() < deadline {
            tokio::time::sleep(Duration::from_millis(10)).await;
        }
    }
    ltca_task.abort();
    pca_task.abort();

    let ok = samples.len();
    let issued = counters.issued.load(Ordering::Relaxed);
    Ok(DdosReport {
        config: cfg.clone(),
        legit: LatencyReport::from_samples(samples),
        legit_failures: failures,
        legit_mean_puzzle_trips: if ok == 0 { 0.0 } else { trips as f64 / ok as f64 },
        attacker_sent: counters.sent.load(Ordering::Relaxed),
        attacker_dropped: counters.dropped.load(Ordering::Relaxed),
        attacker_issued: issued,
        attacker_puzzle_refusals: counters.puzzle.load(Ordering::Relaxed),
        attacker_other_refusals: counters.other.load(Ordering::Relaxed),
        attacker_service_rate: issued as f64 * bogus.first().map_or(0, |b| b.payload.keys.len()) as f64 / attack_secs,
        honest_per_client_rate: if honest_time > 0.0 { honest_issued as f64 / honest_time } else { 0.0 },
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}
