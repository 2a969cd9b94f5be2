//! A dishonest authority that re-signs doctored responses gets past signature
//! checks; the vehicle's identifiable-key and shape checks must still refuse.

use std::sync::Arc;

use vpki::clock::ManualClock;
use vpki::crypto::RandomToken;
use vpki::error::Error;
use vpki::fault::{TamperingLtca, TamperingPca};
use vpki::harness::deploy::Deployment;
use vpki::interval::Interval;
use vpki::model::{PolicyConfig, PolicyKind};
use vpki::vehicle::{plan_requests, Vehicle};

async fn setup() -> (Arc<ManualClock>, Deployment, Vehicle) {
    let clock = Arc::new(ManualClock::new(6_000));
    let dep = Deployment::single(PolicyConfig::new(PolicyKind::P2, 600, 60).unwrap(), clock.clone()).unwrap();
    let v = dep.vehicle("car-1", "home").await.unwrap();
    (clock, dep, v)
}

async fn with_pca(mutate: impl Fn(&mut vpki::model::PseudonymResponse) + Send + Sync + 'static) -> Error {
    let (_, dep, mut v) = setup().await;
    let home = dep.home();
    let pca = TamperingPca::new(home.pca.clone(), mutate);
    let e = &plan_requests(v.policy(), 6_000, 600).unwrap().entries[0];
    let err = v.acquire(e, home.ltca.as_ref(), &pca).await.unwrap_err();
    assert!(v.held().is_empty(), "pseudonyms kept after a refused response");
    err
}

async fn with_ltca(mutate: impl Fn(&vpki::model::TicketRequest, &mut vpki::model::TicketResponse) + Send + Sync + 'static) -> Error {
    let (_, dep, mut v) = setup().await;
    let home = dep.home();
    let ltca = TamperingLtca::new(home.ltca.clone(), mutate);
    let e = &plan_requests(v.policy(), 6_000, 600).unwrap().entries[0];
    v.acquire(e, &ltca, home.pca.as_ref()).await.unwrap_err()
}

#[tokio::test]
async fn honest_passthrough_is_accepted() {
    let (_, dep, mut v) = setup().await;
    let home = dep.home();
    let pca = TamperingPca::new(home.pca.clone(), |_| {});
    let ltca = TamperingLtca::new(home.ltca.clone(), |_, _| {});
    let e = &plan_requests(v.policy(), 6_000, 600).unwrap().entries[0];
    let acq = v.acquire(e, &ltca, &pca).await.unwrap();
    assert_eq!(acq.pseudonyms.len(), 10);
}

#[tokio::test]
async fn pseudonym_ik_randomness_swapped() {
    let err = with_pca(|r| r.rnd_iks.swap(0, 1)).await;
    assert!(matches!(err, Error::ResponseIntegrity(_)), "{err}");
}

#[tokio::test]
async fn pseudonym_ik_replaced() {
    let err = with_pca(|r| r.rnd_iks[3] = RandomToken::random()).await;
    assert!(matches!(err, Error::ResponseIntegrity(_)), "{err}");
}

#[tokio::test]
async fn pseudonym_slot_shifted() {
    let err = with_pca(|r| {
        let v = r.pseudonyms[2].validity;
        r.pseudonyms[2].validity = Interval::new(v.start + 1, v.end + 1).unwrap();
    })
    .await;
    assert!(matches!(err, Error::ResponseIntegrity(_)), "{err}");
}

#[tokio::test]
async fn pseudonym_key_substituted() {
    let err = with_pca(|r| {
        let k = r.pseudonyms[1].public_key.clone();
        r.pseudonyms[0].public_key = k;
    })
    .await;
    assert!(matches!(err, Error::ResponseIntegrity(_)), "{err}");
}

#[tokio::test]
async fn pseudonym_dropped() {
    let err = with_pca(|r| {
        r.pseudonyms.pop();
        r.rnd_iks.pop();
    })
    .await;
    assert!(matches!(err, Error::ResponseIntegrity(_)), "{err}");
}

#[tokio::test]
async fn ticket_ik_randomness_replaced() {
    let err = with_ltca(|_, r| r.rnd_ik = RandomToken::random()).await;
    assert!(matches!(err, Error::ResponseIntegrity(_)), "{err}");
}

#[tokio::test]
async fn ticket_interval_widened() {
    let err = with_ltca(|_, r| {
        let v = r.ticket.validity;
        r.ticket.validity = Interval::new(v.start, v.end + 60).unwrap();
    })
    .await;
    assert!(matches!(err, Error::ResponseIntegrity(_)), "{err}");
}

#[tokio::test]
async fn ticket_ik_bound_to_someone_else() {
    let (_, dep, _) = setup().await;
    let other = dep.vehicle("car-2", "home").await.unwrap();
    let other_ltc = other.ltc().clone();
    let err = with_ltca(move |req, r| {
        let v = req.validity;
        r.ticket.ik = vpki::crypto::compute_ticket_ik(&vpki::wire::Wire::to_bytes(&other_ltc), v.start, v.end, &r.rnd_ik).unwrap();
    })
    .await;
    assert!(matches!(err, Error::ResponseIntegrity(_)), "{err}");
}

#[tokio::test]
async fn stale_plan_is_refused_by_freshness() {
    let (clock, dep, mut v) = setup().await;
    let home = dep.home();
    let e = plan_requests(v.policy(), 6_000, 600).unwrap().entries[0].clone();
    clock.set(6_000 + 3_600);
    let err = v.acquire(&e, home.ltca.as_ref(), home.pca.as_ref()).await.unwrap_err();
    assert!(matches!(err, Error::Freshness(_)), "{err}");
}
