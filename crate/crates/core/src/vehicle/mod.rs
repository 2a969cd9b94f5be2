//! On-board unit: registration, ticket and pseudonym acquisition, and
//! client-side verification of everything an authority hands back.

pub mod plan;
pub mod pool;

use std::sync::Arc;
use std::time::{Duration, Instant};

use log::debug;

pub use plan::{overrun_entry, plan_requests, plan_requests_with_lead, PlanEntry, RequestPlan};
pub use pool::KeyPool;

use crate::api::{LtcaApi, PcaApi};
use crate::clock::Clock;
use crate::crypto::{compute_pseudonym_ik, compute_ticket_ik, target_digest, Digest, KeyPair, RandomToken};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::model::{
    AuthorityId, Envelope, ExchangeRequest, LongTermCertificate, MessageId, PolicyConfig, Pseudonym,
    PseudonymRequest, RegisterRequest, SelfSignedKey, Serial, SignedBody, SignedEnvelope, SubjectId, Ticket,
    TicketRequest, TicketResponse,
};
use crate::pca::puzzle;
use crate::registry::{Registry, Role};
use crate::slots;
use crate::wire::Wire;

#[derive(Debug)]
pub struct HeldPseudonym {
    pub pseudonym: Pseudonym,
    pub key: KeyPair,
    pub ticket_serial: Serial,
}

#[derive(Debug, Clone, Default)]
pub struct Acquisition {
    pub pseudonyms: Vec<Pseudonym>,
    /// Ticket request through verified pseudonyms; key generation excluded.
    pub latency: Duration,
    /// Refused requests plus puzzle step calls.
    pub puzzle_round_trips: usize,
    pub ticket_serial: Option<Serial>,
}

impl Acquisition {
    pub fn skipped(&self) -> bool {
        self.ticket_serial.is_none()
    }
}

fn integrity(what: impl Into<String>) -> Error {
    Error::ResponseIntegrity(what.into())
}

#[derive(Debug)]
pub struct Vehicle {
    subject_id: SubjectId,
    key: KeyPair,
    ltc: LongTermCertificate,
    registry: Arc<Registry>,
    policy: PolicyConfig,
    clock: Arc<dyn Clock>,
    pool: KeyPool,
    held: Vec<HeldPseudonym>,
    max_puzzle_attempts: usize,
}

impl Vehicle {
    /// Wraps an already-certified long-term key.
    pub fn new(
        key: KeyPair,
        ltc: LongTermCertificate,
        policy: PolicyConfig,
        registry: Arc<Registry>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self> {
        policy.validate()?;
        if &ltc.public_key != key.public_key() {
            return Err(Error::InvalidArgument("certificate does not match the long-term key".into()));
        }
        Ok(Vehicle {
            subject_id: ltc.subject_id.clone(),
            key,
            ltc,
            registry,
            policy,
            clock,
            pool: KeyPool::new(),
            held: Vec::new(),
            max_puzzle_attempts: 3,
        })
    }

    /// Generates a long-term key and registers it with `ltca`.
    pub async fn register(
        subject_id: impl Into<SubjectId>,
        policy: PolicyConfig,
        registry: Arc<Registry>,
        clock: Arc<dyn Clock>,
        ltca: &dyn LtcaApi,
    ) -> Result<Self> {
        let subject_id = subject_id.into();
        let key = KeyPair::generate()?;
        let resp = ltca
            .register(RegisterRequest { subject_id: subject_id.clone(), public_key: key.public_key().clone() })
            .await?;
        let ltc = resp.ltc;
        let ltca_key = registry.key_for(ltca.authority_id(), Role::Ltca)?;
        if &ltc.issuer_id != ltca.authority_id() || !ltc.verify_signature(ltca_key) {
            return Err(integrity("certificate is not signed by the registering LTCA"));
        }
        if ltc.subject_id != subject_id || &ltc.public_key != key.public_key() {
            return Err(integrity("certificate binds a different subject or key"));
        }
        Vehicle::new(key, ltc, policy, registry, clock)
    }

    pub fn subject_id(&self) -> &SubjectId {
        &self.subject_id
    }

    pub fn ltc(&self) -> &LongTermCertificate {
        &self.ltc
    }

    pub fn policy(&self) -> &PolicyConfig {
        &self.policy
    }

    pub fn pool_mut(&mut self) -> &mut KeyPool {
        &mut self.pool
    }

    pub fn held(&self) -> &[HeldPseudonym] {
        &self.held
    }

    pub fn set_max_puzzle_attempts(&mut self, n: usize) {
        self.max_puzzle_attempts = n;
    }

    /// Pseudonym to sign with at `now`.
    pub fn current_pseudonym(&self, now: u64) -> Option<&HeldPseudonym> {
        self.held.iter().find(|h| h.pseudonym.validity.contains(now))
    }

    /// Drops pseudonyms whose slot has ended.
    pub fn prune(&mut self, now: u64) {
        self.held.retain(|h| h.pseudonym.validity.end > now);
    }

    /// Slots as the PCA will compute them. The pseudonym request is stamped
    /// with the entry's request time rather than the moment it goes out, so
    /// scheduling delay (magnified under replay compression) cannot shift the
    /// slot arithmetic; the PCA's freshness window bounds the difference.
    fn plan_slots(&self, entry: &PlanEntry) -> Result<(u64, Vec<Interval>)> {
        let t = entry.request_time;
        Ok((t, slots::issuable(&self.policy, entry.interval, t)?))
    }

    /// Runs one plan entry against a home-domain LTCA and PCA.
    pub async fn acquire(&mut self, entry: &PlanEntry, ltca: &dyn LtcaApi, pca: &dyn PcaApi) -> Result<Acquisition> {
        let (t_req, slots) = self.plan_slots(entry)?;
        if slots.is_empty() {
            debug!("{}: nothing left to issue in {}", self.subject_id, entry.interval);
            return Ok(Acquisition::default());
        }
        let keys = self.pool.take(slots.len())?;
        let started = Instant::now();

        let rnd_target = RandomToken::try_random()?;
        let target = target_digest(pca.authority_id().as_str(), &rnd_target);
        let ticket = self.request_ticket(ltca, target, entry.interval).await?;
        let (pseudonyms, trips) = self.request_pseudonyms(pca, &ticket, rnd_target, entry.interval, t_req, &slots, keys).await?;
        Ok(Acquisition {
            pseudonyms,
            latency: started.elapsed(),
            puzzle_round_trips: trips,
            ticket_serial: Some(ticket.serial),
        })
    }

    /// Acquisition in a visited domain: a home ticket aimed at the foreign
    /// LTCA is exchanged there for a ticket the foreign PCA accepts.
    pub async fn acquire_foreign(
        &mut self,
        entry: &PlanEntry,
        home_ltca: &dyn LtcaApi,
        foreign_ltca: &dyn LtcaApi,
        foreign_pca: &dyn PcaApi,
    ) -> Result<Acquisition> {
        let (t_req, slots) = self.plan_slots(entry)?;
        if slots.is_empty() {
            return Ok(Acquisition::default());
        }
        let keys = self.pool.take(slots.len())?;
        let started = Instant::now();

        let rnd_f = RandomToken::try_random()?;
        let f_target = target_digest(foreign_ltca.authority_id().as_str(), &rnd_f);
        let f_ticket = self.request_ticket(home_ltca, f_target, entry.interval).await?;

        let rnd_target = RandomToken::try_random()?;
        let target = target_digest(foreign_pca.authority_id().as_str(), &rnd_target);
        let env = Envelope::new(
            MessageId::ExchangeRequest,
            self.clock.now(),
            ExchangeRequest { foreign_ticket: f_ticket.clone(), rnd_target: rnd_f, target_digest: target, validity: entry.interval },
        );
        let resp = foreign_ltca.exchange(env.clone()).await?;
        resp.answers(MessageId::TicketResponse, &env.nonce)?;
        let ticket = self.check_ticket(foreign_ltca.authority_id(), resp.payload, target, entry.interval, &f_ticket.to_bytes())?;

        let (pseudonyms, trips) =
            self.request_pseudonyms(foreign_pca, &ticket, rnd_target, entry.interval, t_req, &slots, keys).await?;
        Ok(Acquisition {
            pseudonyms,
            latency: started.elapsed(),
            puzzle_round_trips: trips,
            ticket_serial: Some(ticket.serial),
        })
    }

    async fn request_ticket(&self, ltca: &dyn LtcaApi, target: Digest, validity: Interval) -> Result<Ticket> {
        let env = Envelope::new(
            MessageId::TicketRequest,
            self.clock.now(),
            TicketRequest { ltc: self.ltc.clone(), target_digest: target, validity },
        );
        let nonce = env.nonce;
        let resp = ltca.issue_ticket(SignedEnvelope::seal(env, &self.key)?).await?;
        resp.answers(MessageId::TicketResponse, &nonce)?;
        self.check_ticket(ltca.authority_id(), resp.payload, target, validity, &self.ltc.to_bytes())
    }

    fn check_ticket(
        &self,
        issuer: &AuthorityId,
        resp: TicketResponse,
        target: Digest,
        validity: Interval,
        ik_bytes: &[u8],
    ) -> Result<Ticket> {
        let t = resp.ticket;
        if &t.issuer_id != issuer || !t.verify_signature(self.registry.key_for(issuer, Role::Ltca)?) {
            return Err(integrity(format!("ticket {} is not signed by {issuer}", t.serial)));
        }
        if t.target_digest != target {
            return Err(integrity(format!("ticket {} carries a different target", t.serial)));
        }
        if t.validity != validity {
            return Err(integrity(format!("ticket {} covers {} instead of {validity}", t.serial, t.validity)));
        }
        if compute_ticket_ik(ik_bytes, validity.start, validity.end, &resp.rnd_ik)? != t.ik {
            return Err(integrity(format!("ticket {} identifiable key does not open to this vehicle", t.serial)));
        }
        Ok(t)
    }

    async fn request_pseudonyms(
        &mut self,
        pca: &dyn PcaApi,
        ticket: &Ticket,
        rnd_target: RandomToken,
        validity: Interval,
        t_req: u64,
        slots: &[Interval],
        keys: Vec<(KeyPair, SelfSignedKey)>,
    ) -> Result<(Vec<Pseudonym>, usize)> {
        let body = PseudonymRequest {
            ticket: ticket.clone(),
            rnd_target,
            validity,
            keys: keys.iter().map(|(_, s)| s.clone()).collect(),
        };
        let env = Envelope::new(MessageId::PseudonymRequest, t_req, body);

        let mut solution = None;
        let mut trips = 0;
        let mut attempt = 0;
        let resp = loop {
            match pca.issue_pseudonyms(&env, solution.as_ref()).await {
                Ok(r) => break r,
                Err(Error::PuzzleRequired(c)) if attempt < self.max_puzzle_attempts => {
                    attempt += 1;
                    let (sol, steps) = puzzle::solve(&c, |s| pca.puzzle_step(s)).await?;
                    trips += 1 + steps;
                    solution = Some(sol);
                }
                Err(e) => return Err(e),
            }
        };
        resp.answers(MessageId::PseudonymResponse, &env.nonce)?;

        let issuer = pca.authority_id();
        let pca_key = self.registry.key_for(issuer, Role::Pca)?;
        let body = resp.payload;
        if body.pseudonyms.len() != slots.len() || body.rnd_iks.len() != slots.len() {
            return Err(integrity(format!("expected {} pseudonyms, got {}", slots.len(), body.pseudonyms.len())));
        }
        for (i, (p, rnd)) in body.pseudonyms.iter().zip(&body.rnd_iks).enumerate() {
            if &p.issuer_id != issuer || !p.verify_signature(pca_key) {
                return Err(integrity(format!("pseudonym {} is not signed by {issuer}", p.serial)));
            }
            if p.validity != slots[i] {
                return Err(integrity(format!("pseudonym {} covers {} instead of {}", p.serial, p.validity, slots[i])));
            }
            if &p.public_key != keys[i].0.public_key() {
                return Err(integrity(format!("pseudonym {} certifies a foreign key", p.serial)));
            }
            let ik = compute_pseudonym_ik(&ticket.ik, p.public_key.as_bytes(), p.validity.start, p.validity.end, rnd)?;
            if ik != p.ik {
                return Err(integrity(format!("pseudonym {} identifiable key does not open to the ticket", p.serial)));
            }
        }
        for (p, (key, _)) in body.pseudonyms.iter().zip(keys) {
            self.held.push(HeldPseudonym { pseudonym: p.clone(), key, ticket_serial: ticket.serial });
        }
        Ok((body.pseudonyms, trips))
    }
}
