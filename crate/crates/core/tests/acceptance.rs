//! Acceptance criteria. Each test prints one `criterion N ... PASS|FAIL`
//! line straight to stderr (bypassing capture) and fails if its criterion
//! fails. Tests run one at a time so the timing criteria get the machine to
//! themselves.

use std::collections::{HashMap, HashSet};
use std::future::Future;
use std::io::Write;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vpki::analyzer::{collusion_view, timing_link, LedgerSet, Observation, Transcript};
use vpki::api::{LtcaApi, PcaApi};
use vpki::clock::{Clock, ManualClock, ReplayClock, SystemClock};
use vpki::crypto::{target_digest, KeyPair, RandomToken};
use vpki::error::Error;
use vpki::fault::{SwappingLtca, SwappingPca};
use vpki::harness::ddos::{ddos_run, DdosConfig};
use vpki::harness::deploy::{Deployment, DomainSpec};
use vpki::harness::replay::{replay, scaled_skew, trace_origin, Endpoints, ReplayConfig, ReplayReport};
use vpki::harness::roam::roam;
use vpki::harness::stats::Aggregates;
use vpki::harness::trace::{synthesize_trace, ArrivalDist, DurationDist, TraceRecord};
use vpki::http::{ltca_router, pca_router, spawn_local, HttpLtca, HttpPca, ServerLimits};
use vpki::interval::Interval;
use vpki::model::{
    CertStatus, Crl, Envelope, MessageId, OcspRequest, PolicyConfig, PolicyKind, Pseudonym, PseudonymRequest,
    SelfSignedKey, Serial, SignedBody, SignedEnvelope, TicketRequest,
};
use vpki::ltca::LedgerSubject;
use vpki::vehicle::{plan_requests, Vehicle};
use vpki::wire::Wire;

static SERIAL: Mutex<()> = Mutex::new(());

type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: std::result::Result<T, E>, what: &str) -> std::result::Result<T, String> {
    r.map_err(|e| format!("{what}: {e}"))
}

fn criterion<F: Future<Output = Check>>(n: u8, name: &str, f: impl FnOnce() -> F) {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap();
    let started = Instant::now();
    let result = rt.block_on(f());
    let secs = started.elapsed().as_secs_f64();
    let line = match &result {
        Ok(detail) => format!("criterion {n} {name}: PASS in {secs:.1}s ({detail})\n"),
        Err(why) => format!("criterion {n} {name}: FAIL in {secs:.1}s ({why})\n"),
    };
    let _ = std::io::stderr().write_all(line.as_bytes());
    if let Err(why) = result {
        panic!("criterion {n} {name}: {why}");
    }
}

fn p(policy: PolicyKind, gamma: u64, tau: u64) -> PolicyConfig {
    PolicyConfig::new(policy, gamma, tau).unwrap()
}

fn overlaps(a: &Interval, b: &Interval) -> bool {
    a.start < b.end && b.start < a.end
}

// 1 ----------------------------------------------------------------------

async fn sybil() -> Check {
    const SUBJECTS: usize = 3;
    const PER_SUBJECT: usize = 1000;
    let t0 = 10_000;
    let clock = Arc::new(ManualClock::new(t0));
    let dep = ok(Deployment::single(p(PolicyKind::P1, 600, 60), clock), "deploy")?;
    let home = dep.home().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let mut requests = Vec::new();
    for s in 0..SUBJECTS {
        let key = ok(KeyPair::generate(), "keygen")?;
        let ltc = ok(home.ltca.register_vehicle(format!("car-{s}").into(), key.public_key().clone()), "register")?;
        for _ in 0..PER_SUBJECT {
            let start = t0 + rng.random_range(0..20_000);
            let validity = Interval::new(start, start + rng.random_range(60..1200)).unwrap();
            let rnd = RandomToken::random();
            let req = TicketRequest { ltc: ltc.clone(), target_digest: target_digest(home.pca.id().as_str(), &rnd), validity };
            let env = ok(SignedEnvelope::seal(Envelope::new(MessageId::TicketRequest, t0, req), &key), "seal")?;
            requests.push((env, rnd));
        }
    }
    requests.shuffle(&mut rng);

    let workers = 4;
    let chunk = requests.len().div_ceil(workers);
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = requests
            .chunks(chunk)
            .map(|part| {
                let ltca = home.ltca.clone();
                scope.spawn(move || part.iter().map(|(env, rnd)| (ltca.issue_ticket(env), *rnd)).collect::<Vec<_>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    let mut issued = Vec::new();
    for (r, rnd) in results {
        match r {
            Ok(resp) => issued.push((resp.payload.ticket, rnd)),
            Err(Error::SybilRejection(_)) => {}
            Err(e) => return Err(format!("unexpected refusal: {e}")),
        }
    }

    // Two concurrent pseudonym requests per ticket; one must lose.
    let mut pseudonym_requests = Vec::new();
    for (ticket, rnd) in &issued {
        let n = vpki::slots::issuable(&home.pca.config().policy, ticket.validity, t0).unwrap().len();
        let keys = ok((0..n).map(|_| SelfSignedKey::create(&KeyPair::generate()?)).collect::<vpki::Result<Vec<_>>>(), "keys")?;
        let body = PseudonymRequest { ticket: ticket.clone(), rnd_target: *rnd, validity: ticket.validity, keys };
        pseudonym_requests.push(Envelope::new(MessageId::PseudonymRequest, t0, body));
    }
    let outcomes: Vec<_> = std::thread::scope(|scope| {
        let a = scope.spawn(|| pseudonym_requests.iter().map(|r| home.pca.issue_pseudonyms(r).is_ok()).collect::<Vec<_>>());
        let b = scope.spawn(|| pseudonym_requests.iter().rev().map(|r| home.pca.issue_pseudonyms(r).is_ok()).collect::<Vec<_>>());
        let (a, mut b) = (a.join().unwrap(), b.join().unwrap());
        b.reverse();
        a.into_iter().zip(b).collect()
    });
    ensure!(outcomes.iter().all(|(a, b)| a ^ b), "a ticket was redeemed twice or not at all");

    // Brute force over the ledgers, per subject.
    let mut tickets: HashMap<String, Vec<(Serial, Interval)>> = HashMap::new();
    for e in home.ltca.ledger_entries() {
        if let LedgerSubject::Vehicle(id) = e.subject {
            tickets.entry(id.to_string()).or_default().push((e.ticket.serial, e.ticket.validity));
        }
    }
    let (mut ticket_pairs, mut slot_pairs, mut slots_total) = (0usize, 0usize, 0usize);
    for (subject, ts) in &tickets {
        for i in 0..ts.len() {
            for j in i + 1..ts.len() {
                ticket_pairs += 1;
                ensure!(!overlaps(&ts[i].1, &ts[j].1), "{subject}: tickets {} and {} overlap", ts[i].0, ts[j].0);
            }
        }
        let slots: Vec<Interval> = ts
            .iter()
            .flat_map(|(s, _)| home.pca.pseudonyms_of(s))
            .map(|s| home.pca.ledger_entry(&s).unwrap().pseudonym.validity)
            .collect();
        slots_total += slots.len();
        for i in 0..slots.len() {
            for j in i + 1..slots.len() {
                slot_pairs += 1;
                ensure!(!overlaps(&slots[i], &slots[j]), "{subject}: pseudonyms {} and {} overlap", slots[i], slots[j]);
            }
        }
    }
    ensure!(issued.len() == tickets.values().map(Vec::len).sum::<usize>(), "ledger and responses disagree");
    ensure!(issued.len() >= SUBJECTS, "nothing issued");
    Ok(format!(
        "{} requests, {} tickets, {slots_total} pseudonyms, {ticket_pairs} ticket pairs and {slot_pairs} slot pairs disjoint",
        SUBJECTS * PER_SUBJECT,
        issued.len()
    ))
}

#[test]
fn criterion_1_sybil_resistance() {
    criterion(1, "sybil resistance", sybil);
}

// 2 ----------------------------------------------------------------------

fn pseudonyms_of(dep: &Deployment) -> Vec<Pseudonym> {
    let mut out = Vec::new();
    for d in &dep.domains {
        for r in d.pca.export_ledger().records {
            out.push(d.pca.ledger_entry(&r.pseudonym_serial).unwrap().pseudonym);
        }
    }
    out
}

async fn ik_chain() -> Check {
    let run = ok(roam(500, p(PolicyKind::P2, 600, 60), 1_000, 600).await, "roam")?;
    let all = pseudonyms_of(&run.deployment);
    ensure!(all.len() == 10_000, "{} pseudonyms issued", all.len());
    let mut correct = 0;
    for ps in &all {
        let res = ok(run.deployment.ra.resolve(ps, false).await, "resolve")?;
        ensure!(res.ltc.subject_id.to_string() == run.truth[&ps.serial], "{} resolved to the wrong vehicle", ps.serial);
        correct += 1;
    }

    // Small ledger: 10 vehicles x 10 single-pseudonym tickets.
    let clock = Arc::new(ManualClock::new(1_000));
    let dep = ok(Deployment::single(p(PolicyKind::P2, 60, 60), clock.clone()), "deploy")?;
    let home = dep.home().clone();
    for i in 0..10 {
        clock.set(1_000);
        let mut v = ok(dep.vehicle(&format!("car-{i}"), "home").await, "vehicle")?;
        for e in ok(plan_requests(v.policy(), 1_000, 600), "plan")?.entries {
            clock.set(e.request_time);
            ok(v.acquire(&e, home.ltca.as_ref(), home.pca.as_ref()).await, "acquire")?;
        }
    }
    clock.set(1_000);
    let small = pseudonyms_of(&dep);
    ensure!(small.len() == 100, "small ledger holds {}", small.len());
    let ticket_of: Vec<Serial> = small.iter().map(|p| home.pca.ledger_entry(&p.serial).unwrap().ticket_serial).collect();
    let (mut pca_detected, mut ltca_detected) = (0, 0);
    for i in 0..small.len() {
        let j = (i + 1) % small.len();
        let swap = HashMap::from([(small[i].serial, small[j].serial)]);
        let ra = ok(dep.ra_with(|ra| ra.with_pca(home.pca.id().clone(), Arc::new(SwappingPca::new(home.pca.clone(), swap)))), "ra")?;
        match ra.resolve(&small[i], false).await {
            Err(Error::TamperEvidence { .. }) => pca_detected += 1,
            other => return Err(format!("PCA swap at position {i} not detected: {other:?}")),
        }
        let swap = HashMap::from([(ticket_of[i], ticket_of[j])]);
        let ra = ok(dep.ra_with(|ra| ra.with_ltca(home.ltca.id().clone(), Arc::new(SwappingLtca::new(home.ltca.clone(), swap)))), "ra")?;
        match ra.resolve(&small[i], false).await {
            Err(Error::TamperEvidence { .. }) => ltca_detected += 1,
            other => return Err(format!("LTCA swap at position {i} not detected: {other:?}")),
        }
    }
    Ok(format!(
        "{correct}/10000 resolved correctly ({} home, {} foreign); swaps detected {pca_detected}/100 at PCA, {ltca_detected}/100 at LTCA",
        run.home_pseudonyms, run.foreign_pseudonyms
    ))
}

#[test]
fn criterion_2_ik_chain_resolution() {
    criterion(2, "IK-chain resolution", ik_chain);
}

// 3 ----------------------------------------------------------------------

async fn run_replay(trace: &[TraceRecord], policy: PolicyConfig, compression: f64) -> std::result::Result<(ReplayReport, usize), String> {
    let clock = Arc::new(ReplayClock::new(trace_origin(trace), compression));
    let mut spec = DomainSpec::new("home", policy);
    spec.skew_tolerance = scaled_skew(compression);
    let dep = ok(Deployment::build(&[spec], clock.clone()), "deploy")?;
    let ep = Endpoints { ltca: dep.home().ltca.clone(), pca: dep.home().pca.clone(), registry: dep.registry.clone() };
    let cfg = ReplayConfig { compression, ..Default::default() };
    let report = ok(replay(trace, policy, &ep, clock, &cfg).await, "replay")?;
    Ok((report, dep.home().pca.issued_count()))
}

async fn policy_arithmetic() -> Check {
    let trace = ok(
        synthesize_trace(1000, DurationDist::lust(), ArrivalDist::Uniform { start: 3_600, span: 1_800 }, 11),
        "trace",
    )?;
    let compression = 600.0;
    let mut totals = HashMap::new();
    let mut detail = Vec::new();
    for kind in [PolicyKind::P1, PolicyKind::P2, PolicyKind::P3] {
        let policy = p(kind, 600, 60);
        let (r, ledger) = run_replay(&trace, policy, compression).await?;
        ensure!(!r.invalid, "{kind}: run invalid with {} failed trips", r.failures);
        let u = &r.utilization;
        ensure!(ledger == u.issued && ledger == u.used + u.unused, "{kind}: ledger {ledger} != used {} + unused {}", u.used, u.unused);
        match kind {
            PolicyKind::P1 => {
                for t in &r.trips {
                    let want = (t.trip_end - t.departure).div_ceil(60) as usize;
                    ensure!(t.obtained == want, "P1 trip {} got {} instead of {want}", t.vehicle_id, t.obtained);
                }
            }
            PolicyKind::P2 => {
                for t in &r.trips {
                    for q in &t.requests {
                        ensure!(q.interval.len() == 600 && q.obtained == 10, "P2 request at {} got {}", q.request_time, q.obtained);
                    }
                }
                ensure!(u.mean_per_request == 10.0, "P2 mean {}", u.mean_per_request);
            }
            PolicyKind::P3 => {}
        }
        detail.push(format!("{kind} issued {ledger} = {} used + {} unused", u.used, u.unused));
        totals.insert(kind, u.issued);
    }
    ensure!(totals[&PolicyKind::P3] >= totals[&PolicyKind::P1], "P3 {} < P1 {}", totals[&PolicyKind::P3], totals[&PolicyKind::P1]);
    Ok(detail.join("; "))
}

#[test]
fn criterion_3_policy_arithmetic() {
    criterion(3, "policy arithmetic", policy_arithmetic);
}

// 4 ----------------------------------------------------------------------

/// Runs each `(departure, duration)` trip on its own vehicle and returns the
/// transcript with ground truth plus the deployment.
async fn drive(policy: PolicyConfig, trips: &[(u64, u64)]) -> std::result::Result<(Transcript, Deployment), String> {
    let clock = Arc::new(ManualClock::new(trips[0].0));
    let dep = ok(Deployment::single(policy, clock.clone()), "deploy")?;
    let home = dep.home().clone();
    let mut t = Transcript::default();
    for (i, &(dep_t, dur)) in trips.iter().enumerate() {
        clock.set(dep_t);
        let mut v: Vehicle = ok(dep.vehicle(&format!("car-{i}"), "home").await, "vehicle")?;
        for e in ok(plan_requests(&policy, dep_t, dur), "plan")?.entries {
            clock.set(e.request_time);
            ok(v.acquire(&e, home.ltca.as_ref(), home.pca.as_ref()).await, "acquire")?;
        }
        for h in v.held() {
            let ps = &h.pseudonym;
            t.observations.push(Observation { serial: ps.serial, start: ps.validity.start, end: ps.validity.end });
            t.ground_truth.insert(ps.serial, v.subject_id().to_string());
        }
    }
    t.sort();
    Ok((t, dep))
}

/// Vehicles holding a pseudonym valid at `t`.
fn co_active(t: &Transcript, at: u64) -> usize {
    t.observations
        .iter()
        .filter(|o| o.start <= at && at < o.end)
        .map(|o| &t.ground_truth[&o.serial])
        .collect::<HashSet<_>>()
        .len()
}

async fn unlinkability() -> Check {
    const K: usize = 8;
    let (gamma, tau) = (600, 60);
    let w = 6_000;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut offsets: Vec<u64> = (0..tau).collect();
    offsets.shuffle(&mut rng);
    let trips: Vec<(u64, u64)> =
        offsets[..K].iter().map(|&x| (w + x, rng.random_range(gamma * 5 / 2..gamma * 29 / 10))).collect();

    let (t3, _) = drive(p(PolicyKind::P3, gamma, tau), &trips).await?;
    let r3 = timing_link(&t3, 0);
    ensure!(r3.links.is_empty(), "P3: {} pairs linked", r3.links.len());
    let ends: HashMap<Serial, u64> = t3.observations.iter().map(|o| (o.serial, o.end)).collect();
    for (s, n) in &r3.candidate_counts {
        let want = co_active(&t3, ends[s]);
        ensure!(want >= 2, "P3 fixture has an expiry with {want} co-active vehicles");
        ensure!(*n == want, "P3 expiry of {s}: {n} candidates, {want} co-active");
    }
    ensure!(r3.expiry_events > 0 && r3.mean_anonymity_set == K as f64, "P3 mean anonymity set {}", r3.mean_anonymity_set);

    let (t1, _) = drive(p(PolicyKind::P1, gamma, tau), &trips).await?;
    let r1 = timing_link(&t1, 0);
    ensure!(r1.recall >= 0.9, "P1 recall {:.3}", r1.recall);

    let mut full = Vec::new();
    for kind in [PolicyKind::P2, PolicyKind::P3] {
        let (t, dep) = drive(p(kind, tau, tau), &trips).await?;
        let set = LedgerSet { pcah: Some(dep.home().pca.export_ledger()), ..Default::default() };
        let view = ok(collusion_view(&set, &["pcah"], &t.ground_truth), "collusion view")?;
        ensure!(view.pseudonym_groups == 0, "{kind} with Γ=τ: PCA links {} groups", view.pseudonym_groups);
        full.push(format!("{kind} {} pseudonyms", view.pseudonyms_known));
    }
    Ok(format!(
        "P3 {} links over {} expiries, anonymity {:.1}; P1 recall {:.3} ({}/{}); Γ=τ PCA view unlinked ({})",
        r3.links.len(),
        r3.expiry_events,
        r3.mean_anonymity_set,
        r1.recall,
        r1.correct_links,
        r1.true_pairs,
        full.join(", ")
    ))
}

#[test]
fn criterion_4_unlinkability() {
    criterion(4, "P3 unlinkability", unlinkability);
}

// 5 ----------------------------------------------------------------------

async fn collusion_matrix() -> Check {
    let run = ok(roam(50, p(PolicyKind::P2, 600, 60), 1_000, 1_200).await, "roam")?;
    let (h, f) = (run.home_pseudonyms, run.foreign_pseudonyms);
    ensure!(h == 1000 && f == 1000, "{h} home and {f} foreign pseudonyms");
    let v = |m: &[&str]| ok(collusion_view(&run.ledgers, m, &run.truth), "view");

    let r = v(&["hltca"])?;
    ensure!(r.identities_known == 50 && r.intervals_known > 0 && r.pseudonyms_known == 0, "H-LTCA: {r:?}");

    let r = v(&["pcah"])?;
    ensure!(r.identities_known == 0 && r.identified_pseudonyms == 0, "PCA_H identifies: {r:?}");
    ensure!(r.pseudonym_groups == 100 && r.cross_request_groups == 0, "PCA_H links across requests: {r:?}");

    let r = v(&["hltca", "fltca"])?;
    ensure!(r.identified_pseudonyms == 0 && r.pseudonyms_known == 0, "H-LTCA+F-LTCA: {r:?}");

    let r = v(&["pcah", "pcaf"])?;
    ensure!(r.identities_known == 0 && r.identified_pseudonyms == 0 && r.cross_request_groups == 0, "PCA_H+PCA_F: {r:?}");

    let r = v(&["hltca", "pcah"])?;
    ensure!(r.identified_pseudonyms == h && r.correctly_identified == h, "H-LTCA+PCA_H: {r:?}");
    ensure!(r.cross_request_groups == 50 && r.mislinked_groups == 0, "H-LTCA+PCA_H grouping: {r:?}");

    let r = v(&["fltca", "pcaf"])?;
    ensure!(r.identities_known == 0 && r.identified_pseudonyms == 0 && r.pseudonym_groups > 0, "F-LTCA+PCA_F: {r:?}");

    let r = v(&["hltca", "fltca", "pcaf"])?;
    ensure!(r.identified_pseudonyms == f && r.correctly_identified == f, "H-LTCA+F-LTCA+PCA_F: {r:?}");

    let r = v(&["hltca", "fltca", "pcah", "pcaf"])?;
    ensure!(r.identified_pseudonyms == h + f && r.correctly_identified == h + f, "all four: {r:?}");
    ensure!(r.largest_group == 40 && r.mislinked_groups == 0, "all four grouping: {r:?}");
    Ok(format!("8 rows on 50 vehicles, {h} home and {f} foreign pseudonyms"))
}

#[test]
fn criterion_5_collusion_matrix() {
    criterion(5, "collusion matrix", collusion_matrix);
}

// 6 ----------------------------------------------------------------------

async fn revocation() -> Check {
    let t0 = 100_000;
    let clock = Arc::new(ManualClock::new(t0));
    let dep = ok(Deployment::single(p(PolicyKind::P2, 600, 60), clock.clone()), "deploy")?;
    let home = dep.home().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut cars = Vec::new();
    for i in 0..50 {
        clock.set(t0);
        let mut v = ok(dep.vehicle(&format!("car-{i}"), "home").await, "vehicle")?;
        let e = &ok(plan_requests(v.policy(), t0, 600), "plan")?.entries[0];
        ok(v.acquire(e, home.ltca.as_ref(), home.pca.as_ref()).await, "acquire")?;
        cars.push((rng.random_range(t0..t0 + 600), v));
    }
    cars.sort_by_key(|(t, _)| *t);
    let mut expected_crl = HashSet::new();
    for (t, v) in &cars {
        clock.set(*t);
        let held = v.held();
        let target = &held[rng.random_range(0..held.len())].pseudonym;
        let want: HashSet<Serial> = held.iter().filter(|h| h.pseudonym.validity.end > *t).map(|h| h.pseudonym.serial).collect();
        let res = ok(dep.ra.resolve(target, true).await, "resolve")?;
        let got: HashSet<Serial> = res.trail.revoked_pseudonyms.iter().copied().collect();
        ensure!(got == want, "at {t}: revoked {} slots, oracle says {}", got.len(), want.len());
        expected_crl.extend(want);
    }
    let crl = ok(home.pca.crl(0), "crl")?;
    let on_crl: HashSet<Serial> = crl.revoked_serials.iter().copied().collect();
    ensure!(on_crl == expected_crl, "CRL holds {} serials, expected {}", on_crl.len(), expected_crl.len());

    let serials: Vec<Serial> = cars.iter().flat_map(|(_, v)| v.held().iter().map(|h| h.pseudonym.serial)).collect();
    ensure!(serials.len() == 500, "{} serials", serials.len());
    let q = Envelope::new(MessageId::OcspRequest, clock.now(), OcspRequest { serials: serials.clone() });
    let resp = ok(home.pca.ocsp(&q), "ocsp")?;
    ensure!(resp.verify(home.pca.public_key()), "OCSP response signature");
    ensure!(resp.envelope.payload.entries.len() == 500, "OCSP answered {} entries", resp.envelope.payload.entries.len());
    for (s, e) in serials.iter().zip(&resp.envelope.payload.entries) {
        let want = if on_crl.contains(s) { CertStatus::Revoked } else { CertStatus::Good };
        ensure!(e.serial == *s && e.status == want, "OCSP {s}: {:?}, CRL says {want:?}", e.status);
    }

    let big_dep = ok(Deployment::single(p(PolicyKind::P2, 600, 60), Arc::new(ManualClock::new(t0))), "deploy")?;
    let pca = big_dep.home().pca.clone();
    let many: Vec<Serial> = (0..100_000).map(|_| Serial::random()).collect();
    ensure!(ok(pca.revoke_serials(&many), "revoke")? == 100_000, "not all serials were new");
    let crl = ok(pca.crl(0), "crl")?;
    let bytes = crl.to_bytes();
    let back = ok(Crl::from_bytes(&bytes), "decode")?;
    ensure!(back.revoked_serials == many, "CRL round trip changed the serial list");
    ensure!(back.to_bytes() == bytes, "CRL round trip changed the encoding");
    ensure!(back.verify_signature(pca.public_key()), "100k CRL signature");
    Ok(format!(
        "50 resolutions matched the time filter ({} revoked); 500 OCSP statuses match the CRL; 100000-entry CRL ({} KiB) verified",
        expected_crl.len(),
        bytes.len() / 1024
    ))
}

#[test]
fn criterion_6_revocation() {
    criterion(6, "revocation", revocation);
}

// 7 ----------------------------------------------------------------------

async fn ddos() -> Check {
    let run = |rate: u32, puzzle: bool| async move {
        let cfg = DdosConfig { bogus_rate: rate, puzzle, difficulty: 5, ..Default::default() };
        ok(ddos_run(&cfg).await, "ddos run")
    };
    let base_on = run(0, true).await?;
    let attack_on = run(1000, true).await?;
    let base_off = run(0, false).await?;
    let attack_off = run(1000, false).await?;
    let p99 = |r: &vpki::harness::ddos::DdosReport| r.legit.p99();

    ensure!(attack_on.attacker_sent > 0, "attacker sent nothing");
    ensure!(attack_on.attacker_issued == 0, "attacker obtained {} batches through the puzzle", attack_on.attacker_issued);
    ensure!(attack_on.legit_failures == 0 && base_on.legit_failures == 0, "honest failures with the puzzle");
    ensure!(p99(&attack_on) < 10.0 * p99(&base_on), "puzzle on: P99 {:.1} ms vs baseline {:.1} ms", p99(&attack_on), p99(&base_on));
    ensure!(attack_off.attacker_issued > 0, "without the puzzle the attacker was never served");
    ensure!(
        p99(&attack_off) > 1.5 * p99(&base_off),
        "puzzle off: P99 {:.1} ms vs baseline {:.1} ms is not a measurable degradation",
        p99(&attack_off),
        p99(&base_off)
    );
    Ok(format!(
        "puzzle on: P99 {:.1} ms (baseline {:.1}), attacker {} sent / 0 issued; puzzle off: P99 {:.1} ms (baseline {:.1}), attacker {} issued",
        p99(&attack_on),
        p99(&base_on),
        attack_on.attacker_sent,
        p99(&attack_off),
        p99(&base_off),
        attack_off.attacker_issued
    ))
}

#[test]
fn criterion_7_ddos_mitigation() {
    criterion(7, "DDoS mitigation", ddos);
}

// 8 ----------------------------------------------------------------------

async fn performance() -> Check {
    const CLIENTS: usize = 100;
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let policy = p(PolicyKind::P2, 600, 60);
    let dep = ok(Deployment::single(policy, clock.clone()), "deploy")?;
    let home = dep.home().clone();
    let limits = ServerLimits::default();
    let (la, lt) = ok(spawn_local(ltca_router(home.ltca.clone(), &limits)).await, "serve ltca")?;
    let (pa, pt) = ok(spawn_local(pca_router(home.pca.clone(), &limits)).await, "serve pca")?;
    let ltca = Arc::new(HttpLtca::new(home.ltca.id().clone(), &format!("http://{la}")));
    let pca = Arc::new(HttpPca::new(home.pca.id().clone(), &format!("http://{pa}")));

    let now = clock.now();
    let validity = Interval::new(now, now + 600).unwrap();
    let mut prepared = Vec::new();
    for i in 0..CLIENTS {
        let key = ok(KeyPair::generate(), "keygen")?;
        let ltc = ok(home.ltca.register_vehicle(format!("car-{i}").into(), key.public_key().clone()), "register")?;
        let rnd = RandomToken::random();
        let req = TicketRequest { ltc, target_digest: target_digest(home.pca.id().as_str(), &rnd), validity };
        let keys = ok((0..10).map(|_| SelfSignedKey::create(&KeyPair::generate()?)).collect::<vpki::Result<Vec<_>>>(), "keys")?;
        prepared.push((key, req, rnd, keys));
    }

    let barrier = Arc::new(tokio::sync::Barrier::new(CLIENTS));
    let mut tasks = Vec::new();
    for (key, req, rnd, keys) in prepared {
        let (ltca, pca, barrier, clock) = (ltca.clone(), pca.clone(), barrier.clone(), clock.clone());
        tasks.push(tokio::spawn(async move {
            barrier.wait().await;
            let env = SignedEnvelope::seal(Envelope::new(MessageId::TicketRequest, clock.now(), req), &key)?;
            let t = Instant::now();
            let ticket = ltca.issue_ticket(env).await?.payload.ticket;
            let ticket_ms = t.elapsed().as_secs_f64() * 1000.0;
            // Second phase: all 100 clients ask for their batches together.
            barrier.wait().await;
            let body = PseudonymRequest { ticket, rnd_target: rnd, validity, keys };
            let env = Envelope::new(MessageId::PseudonymRequest, clock.now(), body);
            let t = Instant::now();
            let got = pca.issue_pseudonyms(&env, None).await?.payload.pseudonyms.len();
            let pseudonym_ms = t.elapsed().as_secs_f64() * 1000.0;
            Ok::<_, Error>((ticket_ms, pseudonym_ms, got))
        }));
    }
    let (mut tickets, mut batches) = (Vec::new(), Vec::new());
    for t in tasks {
        let (a, b, n) = ok(ok(t.await, "client task")?, "client")?;
        ensure!(n == 10, "batch of {n}");
        tickets.push(a);
        batches.push(b);
    }
    lt.abort();
    pt.abort();
    let (ta, pa) = (ok(Aggregates::of(&tickets), "stats")?, ok(Aggregates::of(&batches), "stats")?);
    ensure!(ta.p95 < 50.0, "ticket P95 {:.1} ms", ta.p95);
    ensure!(pa.p95 < 250.0, "10-pseudonym P95 {:.1} ms", pa.p95);
    Ok(format!(
        "{CLIENTS} concurrent clients over loopback HTTP: ticket P95 {:.1} ms (mean {:.1}), 10-pseudonym P95 {:.1} ms (mean {:.1})",
        ta.p95, ta.mean, pa.p95, pa.mean
    ))
}

#[test]
fn criterion_8_performance_smoke() {
    criterion(8, "performance smoke", performance);
}
