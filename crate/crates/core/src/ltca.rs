//! Long-term certification authority.
//!
//! Registers vehicles, issues anonymous tickets under a per-vehicle
//! non-overlap guard, exchanges foreign tickets for native ones and
//! resolves tickets back to their subject for the RA.

use std::path::Path;
use std::sync::Arc;

use async_trait::async_trait;
use dashmap::mapref::entry::Entry;
use dashmap::DashMap;
use log::{debug, info};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::api::{LtcaApi, LtcaResolver};
use crate::clock::{check_freshness, Clock};
use crate::crypto::{compute_ticket_ik, target_digest, KeyPair, PublicKey, RandomToken};
use crate::error::{Error, Result};
use crate::interval::{DisjointIntervals, Interval};
use crate::journal::Journal;
use crate::model::{
    AuthorityId, Envelope, Epoch, ExchangeRequest, LongTermCertificate, LtcaLedgerExport, LtcaLedgerRecord, MessageId,
    RegisterRequest, RegisterResponse, ResolveTicketRequest, ResolvedSubject, Serial, SignedBody, SignedEnvelope,
    SubjectId, SubjectRef, Ticket, TicketRequest, TicketResolution, TicketResponse, DEFAULT_SKEW_TOLERANCE,
};
use crate::registry::{Registry, Role};
use crate::wire::Wire;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LtcaConfig {
    pub id: AuthorityId,
    pub skew_tolerance: u64,
    /// Longest ticket interval accepted, seconds.
    pub max_span: u64,
    pub ltc_lifetime: u64,
}

impl LtcaConfig {
    pub fn new(id: impl Into<AuthorityId>) -> Self {
        LtcaConfig { id: id.into(), skew_tolerance: DEFAULT_SKEW_TOLERANCE, max_span: 24 * 3600, ltc_lifetime: 10 * 365 * 86400 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LedgerSubject {
    Vehicle(SubjectId),
    ForeignTicket(Ticket),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TicketLedgerEntry {
    pub subject: LedgerSubject,
    pub ticket: Ticket,
    pub rnd_ik: RandomToken,
    pub issued_at: Epoch,
}

#[derive(Debug, Serialize, Deserialize)]
enum Event {
    Registered(LongTermCertificate),
    Issued(TicketLedgerEntry),
    Revoked(SubjectId),
}

type Guard = Arc<Mutex<DisjointIntervals<Serial>>>;

#[derive(Debug)]
pub struct Ltca {
    cfg: LtcaConfig,
    key: KeyPair,
    registry: Arc<Registry>,
    clock: Arc<dyn Clock>,
    certs: DashMap<SubjectId, LongTermCertificate>,
    guards: DashMap<SubjectId, Guard>,
    ledger: DashMap<Serial, TicketLedgerEntry>,
    revoked: DashMap<SubjectId, ()>,
    consumed: DashMap<(AuthorityId, Serial), Serial>,
    journal: Journal<Event>,
}

impl Ltca {
    pub fn new(cfg: LtcaConfig, key: KeyPair, registry: Arc<Registry>, clock: Arc<dyn Clock>) -> Self {
        Ltca {
            cfg,
            key,
            registry,
            clock,
            certs: DashMap::new(),
            guards: DashMap::new(),
            ledger: DashMap::new(),
            revoked: DashMap::new(),
            consumed: DashMap::new(),
            journal: Journal::memory(),
        }
    }

    /// Service backed by the journal at `path`, restoring any earlier state.
    pub fn open(
        cfg: LtcaConfig,
        key: KeyPair,
        registry: Arc<Registry>,
        clock: Arc<dyn Clock>,
        path: impl AsRef<Path>,
    ) -> Result<Self> {
        let (journal, events) = Journal::open(path)?;
        let mut ltca = Ltca::new(cfg, key, registry, clock);
        for event in events {
            ltca.apply(event)?;
        }
        ltca.journal = journal;
        info!("{}: restored {} subjects, {} tickets", ltca.cfg.id, ltca.certs.len(), ltca.ledger.len());
        Ok(ltca)
    }

    fn apply(&self, event: Event) -> Result<()> {
        match event {
            Event::Registered(ltc) => {
                self.certs.insert(ltc.subject_id.clone(), ltc);
            }
            Event::Revoked(id) => {
                self.revoked.insert(id, ());
            }
            Event::Issued(entry) => {
                match &entry.subject {
                    LedgerSubject::Vehicle(id) => {
                        let guard = self.guard(id);
                        let mut guard = guard.lock();
                        guard
                            .insert(entry.ticket.validity, entry.ticket.serial)
                            .map_err(|iv| Error::Fatal(format!("journal holds overlapping tickets for {id} at {iv}")))?;
                    }
                    LedgerSubject::ForeignTicket(f) => {
                        self.consumed.insert((f.issuer_id.clone(), f.serial), entry.ticket.serial);
                    }
                }
                self.ledger.insert(entry.ticket.serial, entry);
            }
        }
        Ok(())
    }

    pub fn id(&self) -> &AuthorityId {
        &self.cfg.id
    }

    pub fn config(&self) -> &LtcaConfig {
        &self.cfg
    }

    pub fn public_key(&self) -> &PublicKey {
        self.key.public_key()
    }

    pub(crate) fn key(&self) -> &KeyPair {
        &self.key
    }

    fn guard(&self, id: &SubjectId) -> Guard {
        self.guards.entry(id.clone()).or_default().clone()
    }

    fn fresh(&self, timestamp: Epoch) -> Result<Epoch> {
        let now = self.clock.now();
        check_freshness(timestamp, now, self.cfg.skew_tolerance)?;
        Ok(now)
    }

    pub fn certificate(&self, id: &SubjectId) -> Option<LongTermCertificate> {
        self.certs.get(id).map(|c| c.clone())
    }

    pub fn is_revoked(&self, id: &SubjectId) -> bool {
        self.revoked.contains_key(id)
    }

    pub fn ledger_len(&self) -> usize {
        self.ledger.len()
    }

    pub fn ledger_entries(&self) -> Vec<TicketLedgerEntry> {
        let mut out: Vec<_> = self.ledger.iter().map(|e| e.value().clone()).collect();
        out.sort_by_key(|e| (e.ticket.validity.start, e.ticket.serial));
        out
    }

    pub fn ledger_entry(&self, serial: &Serial) -> Option<TicketLedgerEntry> {
        self.ledger.get(serial).map(|e| e.clone())
    }

    pub fn export_ledger(&self) -> LtcaLedgerExport {
        let records = self
            .ledger_entries()
            .into_iter()
            .map(|e| LtcaLedgerRecord {
                ticket_serial: e.ticket.serial,
                validity: e.ticket.validity,
                subject: match e.subject {
                    LedgerSubject::Vehicle(id) => SubjectRef::Vehicle(id),
                    LedgerSubject::ForeignTicket(f) => SubjectRef::ForeignTicket { issuer: f.issuer_id, serial: f.serial },
                },
            })
            .collect();
        LtcaLedgerExport { authority: self.cfg.id.clone(), records }
    }

    pub fn register_vehicle(&self, subject_id: SubjectId, public_key: PublicKey) -> Result<LongTermCertificate> {
        let now = self.clock.now();
        match self.certs.entry(subject_id.clone()) {
            Entry::Occupied(_) => Err(Error::Conflict(format!("{subject_id} is already registered"))),
            Entry::Vacant(slot) => {
                let validity = Interval::new(now, now.saturating_add(self.cfg.ltc_lifetime))?;
                let ltc = LongTermCertificate::issue(subject_id, public_key, validity, self.cfg.id.clone(), &self.key)?;
                self.journal.append(&Event::Registered(ltc.clone()))?;
                slot.insert(ltc.clone());
                Ok(ltc)
            }
        }
    }

    fn check_span(&self, validity: &Interval) -> Result<()> {
        if validity.len() > self.cfg.max_span {
            return Err(Error::InvalidArgument(format!(
                "ticket interval {validity} exceeds the {} s maximum",
                self.cfg.max_span
            )));
        }
        Ok(())
    }

    fn sign_ticket(
        &self,
        target: crate::crypto::Digest,
        ik_bytes: &[u8],
        validity: Interval,
    ) -> Result<(Ticket, RandomToken)> {
        let rnd_ik = RandomToken::try_random()?;
        let ik = compute_ticket_ik(ik_bytes, validity.start, validity.end, &rnd_ik)?;
        let serial = Serial(RandomToken::try_random()?);
        if self.ledger.contains_key(&serial) {
            return Err(Error::Fatal(format!("ticket serial collision {serial}")));
        }
        let ticket = Ticket::issue(serial, target, ik, validity, self.cfg.id.clone(), &self.key)?;
        Ok((ticket, rnd_ik))
    }

    /// Native ticket issuance for a registered vehicle.
    pub fn issue_ticket(&self, req: &SignedEnvelope<TicketRequest>) -> Result<Envelope<TicketResponse>> {
        let env = &req.envelope;
        env.expect(MessageId::TicketRequest)?;
        let now = self.fresh(env.timestamp)?;
        let body = &env.payload;
        let ltc = &body.ltc;
        let subject = &ltc.subject_id;

        if ltc.issuer_id != self.cfg.id || !ltc.verify_signature(self.key.public_key()) {
            return Err(Error::Authorization(format!("certificate for {subject} was not issued here")));
        }
        match self.certs.get(subject) {
            Some(known) if *known == *ltc => {}
            _ => return Err(Error::Authorization(format!("{subject} is not registered"))),
        }
        if self.is_revoked(subject) {
            return Err(Error::Authorization(format!("{subject} is revoked")));
        }
        if !ltc.validity.contains(now) {
            return Err(Error::Authorization(format!("certificate of {subject} is not valid at {now}")));
        }
        if !req.verify(&ltc.public_key) {
            return Err(Error::Authentication(format!("request signature does not verify under the certificate of {subject}")));
        }
        self.check_span(&body.validity)?;

        let guard = self.guard(subject);
        let mut guard = guard.lock();
        if let Some((existing, serial)) = guard.conflict(&body.validity) {
            debug!("{}: refusing {} for {subject}: overlaps {existing} ({serial})", self.cfg.id, body.validity);
            return Err(Error::SybilRejection(format!("{} overlaps an issued ticket at {existing}", body.validity)));
        }
        let (ticket, rnd_ik) = self.sign_ticket(body.target_digest, &ltc.to_bytes(), body.validity)?;
        let entry = TicketLedgerEntry {
            subject: LedgerSubject::Vehicle(subject.clone()),
            ticket: ticket.clone(),
            rnd_ik,
            issued_at: now,
        };
        self.journal.append(&Event::Issued(entry.clone()))?;
        guard.insert(ticket.validity, ticket.serial).expect("conflict checked under the same lock");
        self.ledger.insert(ticket.serial, entry);
        drop(guard);

        Ok(env.reply(MessageId::TicketResponse, now, TicketResponse { ticket, rnd_ik }))
    }

    /// Swaps a ticket issued by a trusted LTCA of another domain (and targeted
    /// at this one) for a native ticket.
    pub fn exchange_foreign_ticket(&self, req: &Envelope<ExchangeRequest>) -> Result<Envelope<TicketResponse>> {
        req.expect(MessageId::ExchangeRequest)?;
        let now = self.fresh(req.timestamp)?;
        let body = &req.payload;
        let f = &body.foreign_ticket;

        if f.issuer_id == self.cfg.id {
            return Err(Error::InvalidArgument("ticket was issued by this LTCA; use it directly".into()));
        }
        let issuer_key = self.registry.key_for(&f.issuer_id, Role::Ltca)?;
        if !f.verify_signature(issuer_key) {
            return Err(Error::Authentication(format!("foreign ticket signature does not verify under {}", f.issuer_id)));
        }
        if target_digest(self.cfg.id.as_str(), &body.rnd_target) != f.target_digest {
            return Err(Error::WrongTarget(format!("foreign ticket {} is not meant for {}", f.serial, self.cfg.id)));
        }
        if f.validity.end <= now {
            return Err(Error::Policy(format!("foreign ticket expired at {}", f.validity.end)));
        }
        if !body.validity.within(&f.validity) {
            return Err(Error::Policy(format!("{} is outside the foreign ticket interval {}", body.validity, f.validity)));
        }
        self.check_span(&body.validity)?;

        let key = (f.issuer_id.clone(), f.serial);
        let slot = match self.consumed.entry(key) {
            Entry::Occupied(_) => return Err(Error::Replay(format!("foreign ticket {} was already exchanged", f.serial))),
            Entry::Vacant(slot) => slot,
        };
        let (ticket, rnd_ik) = self.sign_ticket(body.target_digest, &f.to_bytes(), body.validity)?;
        let entry = TicketLedgerEntry {
            subject: LedgerSubject::ForeignTicket(f.clone()),
            ticket: ticket.clone(),
            rnd_ik,
            issued_at: now,
        };
        self.journal.append(&Event::Issued(entry.clone()))?;
        slot.insert(ticket.serial);
        self.ledger.insert(ticket.serial, entry);

        Ok(req.reply(MessageId::TicketResponse, now, TicketResponse { ticket, rnd_ik }))
    }

    /// RA-only: maps a ticket back to the certificate (or foreign ticket) it
    /// was issued against, optionally revoking the vehicle.
    pub fn resolve_ticket(&self, req: &SignedEnvelope<ResolveTicketRequest>) -> Result<SignedEnvelope<TicketResolution>> {
        let env = &req.envelope;
        env.expect(MessageId::ResolveTicketRequest)?;
        if !self.registry.any_ra(|k| req.verify(k)) {
            return Err(Error::Authorization("resolution requests must be signed by a resolution authority".into()));
        }
        let now = self.fresh(env.timestamp)?;
        let serial = env.payload.ticket.serial;
        let entry = self
            .ledger
            .get(&serial)
            .map(|e| e.clone())
            .ok_or_else(|| Error::NotFound(format!("ticket {serial}")))?;

        let subject = match &entry.subject {
            LedgerSubject::Vehicle(id) => {
                let ltc = self.certificate(id).ok_or_else(|| Error::Fatal(format!("ledger names unregistered {id}")))?;
                if env.payload.revoke && self.revoked.insert(id.clone(), ()).is_none() {
                    self.journal.append(&Event::Revoked(id.clone()))?;
                    info!("{}: revoked {id}", self.cfg.id);
                }
                ResolvedSubject::Ltc(ltc)
            }
            LedgerSubject::ForeignTicket(f) => ResolvedSubject::ForeignTicket(f.clone()),
        };
        let reply = env.reply(MessageId::ResolveTicketResponse, now, TicketResolution { subject, rnd_ik: entry.rnd_ik });
        SignedEnvelope::seal(reply, &self.key)
    }

    /// Signs an arbitrary resolution answer with this authority's key.
    pub(crate) fn seal_resolution(
        &self,
        req: &Envelope<ResolveTicketRequest>,
        body: TicketResolution,
    ) -> Result<SignedEnvelope<TicketResolution>> {
        SignedEnvelope::seal(req.reply(MessageId::ResolveTicketResponse, self.clock.now(), body), &self.key)
    }
}

#[async_trait]
impl LtcaApi for Ltca {
    fn authority_id(&self) -> &AuthorityId {
        &self.cfg.id
    }

    async fn register(&self, req: RegisterRequest) -> Result<RegisterResponse> {
        Ok(RegisterResponse { ltc: self.register_vehicle(req.subject_id, req.public_key)? })
    }

    async fn issue_ticket(&self, req: SignedEnvelope<TicketRequest>) -> Result<Envelope<TicketResponse>> {
        Ltca::issue_ticket(self, &req)
    }

    async fn exchange(&self, req: Envelope<ExchangeRequest>) -> Result<Envelope<TicketResponse>> {
        self.exchange_foreign_ticket(&req)
    }
}

#[async_trait]
impl LtcaResolver for Ltca {
    async fn resolve_ticket(&self, req: SignedEnvelope<ResolveTicketRequest>) -> Result<SignedEnvelope<TicketResolution>> {
        Ltca::resolve_ticket(self, &req)
    }
}
