//! Vehicles, RA and status queries against services served over loopback.

use std::sync::Arc;

use vpki::api::{LtcaApi, PcaApi};
use vpki::clock::SystemClock;
use vpki::error::Error;
use vpki::harness::deploy::{Deployment, DomainSpec};
use vpki::http::{ltca_router, pca_router, spawn_local, HttpLtca, HttpPca, ServerLimits};
use vpki::model::{CertStatus, CrlRequest, Envelope, MessageId, OcspRequest, PolicyConfig, PolicyKind, SignedBody};
use vpki::pca::puzzle::{PuzzleConfig, PuzzleMode};
use vpki::ra::{Ra, RevocationPlan};
use vpki::vehicle::plan_requests;

struct Served {
    dep: Deployment,
    ltcas: Vec<Arc<HttpLtca>>,
    pcas: Vec<Arc<HttpPca>>,
    tasks: Vec<tokio::task::JoinHandle<vpki::Result<()>>>,
}

impl Drop for Served {
    fn drop(&mut self) {
        for t in &self.tasks {
            t.abort();
        }
    }
}

async fn serve(specs: &[DomainSpec]) -> Served {
    let dep = Deployment::build(specs, Arc::new(SystemClock)).unwrap();
    let limits = ServerLimits::default();
    let (mut ltcas, mut pcas, mut tasks) = (Vec::new(), Vec::new(), Vec::new());
    for d in &dep.domains {
        let (a, t) = spawn_local(ltca_router(d.ltca.clone(), &limits)).await.unwrap();
        ltcas.push(Arc::new(HttpLtca::new(d.ltca.id().clone(), &format!("http://{a}"))));
        tasks.push(t);
        let (a, t) = spawn_local(pca_router(d.pca.clone(), &limits)).await.unwrap();
        pcas.push(Arc::new(HttpPca::new(d.pca.id().clone(), &format!("http://{a}"))));
        tasks.push(t);
    }
    Served { dep, ltcas, pcas, tasks }
}

fn p2() -> PolicyConfig {
    PolicyConfig::new(PolicyKind::P2, 600, 60).unwrap()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn acquire_resolve_and_revoke_over_http() {
    let s = serve(&[DomainSpec::new("home", p2()), DomainSpec::new("foreign", p2())]).await;
    let clock = s.dep.clock.clone();
    let mut v = vpki::vehicle::Vehicle::register("car-7", p2(), s.dep.registry.clone(), clock.clone(), s.ltcas[0].as_ref())
        .await
        .unwrap();
    let now = clock.now();
    let e = &plan_requests(&p2(), now, 600).unwrap().entries[0];
    let home = v.acquire(e, s.ltcas[0].as_ref(), s.pcas[0].as_ref()).await.unwrap();
    assert_eq!(home.pseudonyms.len(), 10);
    let e = &plan_requests(&p2(), home.pseudonyms[9].validity.end, 600).unwrap().entries[0];
    let e = vpki::vehicle::PlanEntry { request_time: clock.now(), ..e.clone() };
    let abroad = v.acquire_foreign(&e, s.ltcas[0].as_ref(), s.ltcas[1].as_ref(), s.pcas[1].as_ref()).await.unwrap();
    assert_eq!(abroad.pseudonyms.len(), 10);
    assert_eq!(abroad.pseudonyms[0].issuer_id.as_str(), "foreign-pca");

    let mut ra = Ra::new("ra", vpki::crypto::KeyPair::generate().unwrap(), s.dep.registry.clone(), clock.clone());
    // A key outside the registry must not be able to resolve.
    for (l, p) in s.ltcas.iter().zip(&s.pcas) {
        ra = ra.with_ltca(l.authority_id().clone(), l.clone()).with_pca(p.authority_id().clone(), p.clone());
    }
    let err = ra.resolve(&home.pseudonyms[0], false).await.unwrap_err();
    assert!(matches!(err, Error::Authorization(_)), "{err}");

    let ra = s.dep.ra_with(|mut ra| {
        for (l, p) in s.ltcas.iter().zip(&s.pcas) {
            ra = ra.with_ltca(l.authority_id().clone(), l.clone()).with_pca(p.authority_id().clone(), p.clone());
        }
        ra
    })
    .unwrap();
    let res = ra.resolve(&abroad.pseudonyms[4], false).await.unwrap();
    assert_eq!(res.ltc.subject_id.to_string(), "car-7");
    assert_eq!(res.trail.hops.len(), 3);
    assert!(res.trail.hops.iter().all(|h| h.ik_matches()));

    let res = ra.resolve(&home.pseudonyms[0], RevocationPlan { at_pca: true, at_ltca: false }).await.unwrap();
    assert_eq!(res.ltc.subject_id.to_string(), "car-7");
    let revoked = &res.trail.revoked_pseudonyms;
    assert!(!revoked.is_empty() && revoked.len() <= 10);

    let crl = s.pcas[0].get_crl(CrlRequest { since_sequence: 0 }).await.unwrap();
    assert!(crl.verify_signature(s.dep.home().pca.public_key()));
    assert_eq!(&crl.revoked_serials, revoked);
    let serials: Vec<_> = home.pseudonyms.iter().map(|p| p.serial).collect();
    let q = Envelope::new(MessageId::OcspRequest, clock.now(), OcspRequest { serials });
    let r = s.pcas[0].ocsp(q).await.unwrap();
    assert!(r.verify(s.dep.home().pca.public_key()));
    for entry in &r.envelope.payload.entries {
        let want = if revoked.contains(&entry.serial) { CertStatus::Revoked } else { CertStatus::Good };
        assert_eq!(entry.status, want);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn errors_keep_their_codes_across_the_wire() {
    let s = serve(&[DomainSpec::new("home", p2())]).await;
    let clock = s.dep.clock.clone();
    let mut v = vpki::vehicle::Vehicle::register("car-8", p2(), s.dep.registry.clone(), clock.clone(), s.ltcas[0].as_ref())
        .await
        .unwrap();
    let e = &plan_requests(&p2(), clock.now(), 600).unwrap().entries[0];
    v.acquire(e, s.ltcas[0].as_ref(), s.pcas[0].as_ref()).await.unwrap();
    // The same interval again is a second overlapping ticket.
    let err = v.acquire(e, s.ltcas[0].as_ref(), s.pcas[0].as_ref()).await.unwrap_err();
    assert!(matches!(err, Error::SybilRejection(_)), "{err}");

    let err = s.pcas[0].send_raw_pseudonym_request(b"not a request").await.unwrap_err();
    assert!(matches!(err, Error::Decode { .. }), "{err}");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn puzzle_gate_over_http() {
    let mut spec = DomainSpec::new("home", p2());
    spec.puzzle = PuzzleConfig { mode: PuzzleMode::Always, difficulty: 3, ..PuzzleConfig::default() };
    let s = serve(&[spec]).await;
    let clock = s.dep.clock.clone();
    let mut v = vpki::vehicle::Vehicle::register("car-9", p2(), s.dep.registry.clone(), clock.clone(), s.ltcas[0].as_ref())
        .await
        .unwrap();
    let e = &plan_requests(&p2(), clock.now(), 600).unwrap().entries[0];
    let acq = v.acquire(e, s.ltcas[0].as_ref(), s.pcas[0].as_ref()).await.unwrap();
    assert_eq!(acq.pseudonyms.len(), 10);
    // The refused request carries the first stage; two step calls remain.
    assert_eq!(acq.puzzle_round_trips, 3);

    // Without a solution a well-formed request is refused with a challenge.
    let mut w = vpki::vehicle::Vehicle::register("car-10", p2(), s.dep.registry.clone(), clock.clone(), s.ltcas[0].as_ref())
        .await
        .unwrap();
    w.set_max_puzzle_attempts(0);
    let err = w.acquire(e, s.ltcas[0].as_ref(), s.pcas[0].as_ref()).await.unwrap_err();
    assert!(matches!(err, Error::PuzzleRequired(_)), "{err}");
}
