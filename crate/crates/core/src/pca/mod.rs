//! Pseudonym certification authority.
//!
//! Exchanges an anonymous ticket for one pseudonym per slot of the requested
//! interval, keeps the pseudonym-to-ticket ledger the RA resolves against,
//! and publishes revocations through CRL deltas and batched status queries.

pub mod crl;
pub mod puzzle;

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use async_trait::async_trait;
use dashmap::mapref::entry::Entry;
use dashmap::DashMap;
use log::info;
use parking_lot::RwLock;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::api::{PcaApi, PcaResolver};
use crate::clock::{check_freshness, Clock};
use crate::crypto::{compute_pseudonym_ik, target_digest, Digest, KeyPair, PublicKey, RandomToken};
use crate::error::{Error, Result};
use crate::journal::Journal;
use crate::model::{
    AuthorityId, CertStatus, Crl, CrlRequest, Envelope, Epoch, MessageId, OcspEntry, OcspRequest, OcspResponse,
    PcaLedgerExport, PcaLedgerRecord, PolicyConfig, PolicyKind, Pseudonym, PseudonymRequest, PseudonymResolution,
    PseudonymResponse, PuzzleSolution, PuzzleStep, ResolvePseudonymRequest, Serial, SignedBody, SignedEnvelope, Ticket,
    DEFAULT_SKEW_TOLERANCE,
};
use crate::registry::{Registry, Role};
use crate::slots;
use crate::wire::Wire;
use crl::CrlStore;
use puzzle::{PuzzleConfig, PuzzleGate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PossessionCheck {
    /// Verify every self-signed key.
    All,
    /// Verify each key independently with this probability.
    Sample(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaConfig {
    pub id: AuthorityId,
    pub policy: PolicyConfig,
    pub skew_tolerance: u64,
    pub possession: PossessionCheck,
    pub puzzle: PuzzleConfig,
    pub ocsp_batch_cap: usize,
}

impl PcaConfig {
    pub fn new(id: impl Into<AuthorityId>, policy: PolicyConfig) -> Self {
        PcaConfig {
            id: id.into(),
            policy,
            skew_tolerance: DEFAULT_SKEW_TOLERANCE,
            possession: PossessionCheck::All,
            puzzle: PuzzleConfig::default(),
            ocsp_batch_cap: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudonymLedgerEntry {
    pub pseudonym: Pseudonym,
    pub ticket_serial: Serial,
    pub rnd_ik: RandomToken,
}

#[derive(Debug, Clone)]
struct TicketRecord {
    ticket: Ticket,
    pseudonyms: Vec<Serial>,
}

#[derive(Debug, Serialize, Deserialize)]
enum Event {
    Issued { ticket: Ticket, entries: Vec<PseudonymLedgerEntry> },
    Revoked(Vec<Serial>),
}

/// Counts a request as in flight until dropped.
pub struct LoadGuard<'a>(&'a AtomicUsize);

impl Drop for LoadGuard<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::AcqRel);
    }
}

#[derive(Debug)]
pub struct Pca {
    cfg: PcaConfig,
    key: KeyPair,
    registry: Arc<Registry>,
    clock: Arc<dyn Clock>,
    domain: Option<String>,
    consumed: DashMap<Serial, ()>,
    tickets: DashMap<Serial, TicketRecord>,
    ledger: DashMap<Serial, PseudonymLedgerEntry>,
    crl: RwLock<CrlStore>,
    gate: PuzzleGate,
    in_flight: AtomicUsize,
    journal: Journal<Event>,
}

impl Pca {
    pub fn new(cfg: PcaConfig, key: KeyPair, registry: Arc<Registry>, clock: Arc<dyn Clock>) -> Result<Self> {
        cfg.policy.validate()?;
        let gate = PuzzleGate::new(cfg.puzzle)?;
        let domain = registry.get(&cfg.id).map(|a| a.domain.clone());
        Ok(Pca {
            cfg,
            key,
            registry,
            clock,
            domain,
            consumed: DashMap::new(),
            tickets: DashMap::new(),
            ledger: DashMap::new(),
            crl: RwLock::new(CrlStore::default()),
            gate,
            in_flight: AtomicUsize::new(0),
            journal: Journal::memory(),
        })
    }

    /// Service backed by the journal at `path`, restoring any earlier state.
    pub fn open(
        cfg: PcaConfig,
        key: KeyPair,
        registry: Arc<Registry>,
        clock: Arc<dyn Clock>,
        path: impl AsRef<Path>,
    ) -> Result<Self> {
        let (journal, events) = Journal::open(path)?;
        let mut pca = Pca::new(cfg, key, registry, clock)?;
        for event in events {
            match event {
                Event::Issued { ticket, entries } => pca.record(ticket, entries),
                Event::Revoked(serials) => {
                    let mut crl = pca.crl.write();
                    for s in serials {
                        crl.revoke(s);
                    }
                }
            }
        }
        pca.journal = journal;
        info!("{}: restored {} pseudonyms, {} revoked", pca.cfg.id, pca.ledger.len(), pca.crl.read().latest());
        Ok(pca)
    }

    fn record(&self, ticket: Ticket, entries: Vec<PseudonymLedgerEntry>) {
        let serial = ticket.serial;
        self.consumed.insert(serial, ());
        let pseudonyms = entries.iter().map(|e| e.pseudonym.serial).collect();
        for e in entries {
            self.ledger.insert(e.pseudonym.serial, e);
        }
        self.tickets.insert(serial, TicketRecord { ticket, pseudonyms });
    }

    pub fn id(&self) -> &AuthorityId {
        &self.cfg.id
    }

    pub fn config(&self) -> &PcaConfig {
        &self.cfg
    }

    pub fn public_key(&self) -> &PublicKey {
        self.key.public_key()
    }

    pub(crate) fn key(&self) -> &KeyPair {
        &self.key
    }

    pub fn issued_count(&self) -> usize {
        self.ledger.len()
    }

    pub fn crl_len(&self) -> u64 {
        self.crl.read().latest()
    }

    pub fn ledger_entry(&self, serial: &Serial) -> Option<PseudonymLedgerEntry> {
        self.ledger.get(serial).map(|e| e.clone())
    }

    /// Pseudonym serials issued against `ticket_serial`, in slot order.
    pub fn pseudonyms_of(&self, ticket_serial: &Serial) -> Vec<Serial> {
        self.tickets.get(ticket_serial).map(|r| r.pseudonyms.clone()).unwrap_or_default()
    }

    pub fn export_ledger(&self) -> PcaLedgerExport {
        let mut records: Vec<_> = self
            .ledger
            .iter()
            .map(|e| PcaLedgerRecord {
                pseudonym_serial: e.pseudonym.serial,
                ticket_serial: e.ticket_serial,
                validity: e.pseudonym.validity,
            })
            .collect();
        records.sort_by_key(|r| (r.validity.start, r.pseudonym_serial));
        PcaLedgerExport { authority: self.cfg.id.clone(), records }
    }

    pub fn enter(&self) -> LoadGuard<'_> {
        self.in_flight.fetch_add(1, Ordering::AcqRel);
        LoadGuard(&self.in_flight)
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.load(Ordering::Acquire)
    }

    /// Puzzle gate over the raw request bytes. Cheap: one hash and at most
    /// `L` HMACs, no decoding.
    pub fn admit(&self, request_bytes: &[u8], solution: Option<&PuzzleSolution>) -> Result<()> {
        if !self.gate.active(self.in_flight()) {
            return Ok(());
        }
        self.gate.admit(Digest::of(request_bytes), solution)
    }

    pub fn puzzle_step(&self, step: &PuzzleStep) -> Result<PuzzleStep> {
        self.gate.step(step)
    }

    fn fresh(&self, timestamp: Epoch) -> Result<Epoch> {
        let now = self.clock.now();
        check_freshness(timestamp, now, self.cfg.skew_tolerance)?;
        Ok(now)
    }

    fn check_ticket_issuer(&self, ticket: &Ticket) -> Result<()> {
        let key = self.registry.key_for(&ticket.issuer_id, Role::Ltca)?;
        if let (Some(mine), Some(theirs)) = (&self.domain, self.registry.get(&ticket.issuer_id)) {
            if *mine != theirs.domain {
                return Err(Error::Authorization(format!(
                    "ticket issuer {} is outside domain {mine}; exchange it first",
                    ticket.issuer_id
                )));
            }
        }
        if !ticket.verify_signature(key) {
            return Err(Error::Authentication(format!("ticket signature does not verify under {}", ticket.issuer_id)));
        }
        Ok(())
    }

    fn check_possession(&self, req: &PseudonymRequest) -> Result<()> {
        let mut rng = rand::rng();
        for (i, k) in req.keys.iter().enumerate() {
            let check = match self.cfg.possession {
                PossessionCheck::All => true,
                PossessionCheck::Sample(p) => rng.random_bool(p.clamp(0.0, 1.0)),
            };
            if check && !k.verify() {
                return Err(Error::Possession(format!("key {i} is not self-signed")));
            }
        }
        Ok(())
    }

    pub fn issue_pseudonyms(&self, req: &Envelope<PseudonymRequest>) -> Result<Envelope<PseudonymResponse>> {
        req.expect(MessageId::PseudonymRequest)?;
        let t_now = req.timestamp;
        let now = self.fresh(t_now)?;
        let body = &req.payload;
        let ticket = &body.ticket;

        self.check_ticket_issuer(ticket)?;
        if target_digest(self.cfg.id.as_str(), &body.rnd_target) != ticket.target_digest {
            return Err(Error::WrongTarget(format!("ticket {} is not meant for {}", ticket.serial, self.cfg.id)));
        }
        let interval_ok = match self.cfg.policy.policy {
            PolicyKind::P1 | PolicyKind::P2 => body.validity.within(&ticket.validity),
            PolicyKind::P3 => body.validity == ticket.validity,
        };
        if !interval_ok {
            return Err(Error::Policy(format!(
                "{} interval {} does not fit ticket interval {}",
                self.cfg.policy.policy, body.validity, ticket.validity
            )));
        }
        if body.validity.end <= t_now {
            return Err(Error::Policy(format!("interval {} has already ended", body.validity)));
        }
        let slots = slots::issuable(&self.cfg.policy, body.validity, t_now)?;
        if slots.is_empty() {
            return Err(Error::Policy(format!("no slot of {} is still usable at {t_now}", body.validity)));
        }
        if slots.len() != body.keys.len() {
            return Err(Error::Arity(format!("{} keys for {} slots", body.keys.len(), slots.len())));
        }
        self.check_possession(body)?;

        match self.consumed.entry(ticket.serial) {
            Entry::Occupied(_) => return Err(Error::Replay(format!("ticket {} was already used", ticket.serial))),
            Entry::Vacant(slot) => {
                slot.insert(());
            }
        }

        let mut pseudonyms = Vec::with_capacity(slots.len());
        let mut rnd_iks = Vec::with_capacity(slots.len());
        let mut entries = Vec::with_capacity(slots.len());
        for (slot, key) in slots.iter().zip(&body.keys) {
            let rnd = RandomToken::try_random()?;
            let ik = compute_pseudonym_ik(&ticket.ik, key.public_key.as_bytes(), slot.start, slot.end, &rnd)?;
            let serial = Serial(RandomToken::try_random()?);
            if self.ledger.contains_key(&serial) {
                return Err(Error::Fatal(format!("pseudonym serial collision {serial}")));
            }
            let p = Pseudonym::issue(serial, key.public_key.clone(), ik, *slot, self.cfg.id.clone(), &self.key)?;
            entries.push(PseudonymLedgerEntry { pseudonym: p.clone(), ticket_serial: ticket.serial, rnd_ik: rnd });
            pseudonyms.push(p);
            rnd_iks.push(rnd);
        }
        let event = Event::Issued { ticket: ticket.clone(), entries };
        self.journal.append(&event)?;
        let Event::Issued { ticket, entries } = event else { unreachable!() };
        self.record(ticket, entries);

        Ok(req.reply(MessageId::PseudonymResponse, now, PseudonymResponse { pseudonyms, rnd_iks }))
    }

    /// Places every listed serial on the CRL. Returns how many were new.
    pub fn revoke_serials(&self, serials: &[Serial]) -> Result<usize> {
        let mut crl = self.crl.write();
        let fresh: Vec<Serial> = serials.iter().copied().filter(|s| !crl.is_revoked(s)).collect();
        if !fresh.is_empty() {
            self.journal.append(&Event::Revoked(fresh.clone()))?;
        }
        for s in &fresh {
            crl.revoke(*s);
        }
        Ok(fresh.len())
    }

    pub(crate) fn check_ra(&self, req: &SignedEnvelope<ResolvePseudonymRequest>) -> Result<Epoch> {
        req.envelope.expect(MessageId::ResolvePseudonymRequest)?;
        if !self.registry.any_ra(|k| req.verify(k)) {
            return Err(Error::Authorization("resolution requests must be signed by a resolution authority".into()));
        }
        self.fresh(req.envelope.timestamp)
    }

    /// RA-only: the ticket a pseudonym was issued against. With `revoke`, all
    /// still-valid pseudonyms of that ticket go on the CRL.
    pub fn resolve_pseudonym(
        &self,
        req: &SignedEnvelope<ResolvePseudonymRequest>,
    ) -> Result<SignedEnvelope<PseudonymResolution>> {
        self.check_ra(req)?;
        let p = &req.envelope.payload.pseudonym;
        if p.issuer_id != self.cfg.id {
            return Err(Error::NotFound(format!("pseudonym {} was issued by {}", p.serial, p.issuer_id)));
        }
        self.resolve_serial(&req.envelope, &p.serial)
    }

    /// Answers `req` with the ledger entry of `serial`.
    pub(crate) fn resolve_serial(
        &self,
        req: &Envelope<ResolvePseudonymRequest>,
        serial: &Serial,
    ) -> Result<SignedEnvelope<PseudonymResolution>> {
        let now = self.clock.now();
        let entry = self.ledger_entry(serial).ok_or_else(|| Error::NotFound(format!("pseudonym {serial}")))?;
        let record = self
            .tickets
            .get(&entry.ticket_serial)
            .map(|r| r.clone())
            .ok_or_else(|| Error::Fatal(format!("ledger names unknown ticket {}", entry.ticket_serial)))?;

        let mut revoked = Vec::new();
        if req.payload.revoke {
            let live: Vec<Serial> = record
                .pseudonyms
                .iter()
                .filter(|s| self.ledger.get(*s).is_some_and(|e| e.pseudonym.validity.end > now))
                .copied()
                .collect();
            let mut crl = self.crl.write();
            revoked = live.into_iter().filter(|s| !crl.is_revoked(s)).collect();
            if !revoked.is_empty() {
                self.journal.append(&Event::Revoked(revoked.clone()))?;
            }
            for s in &revoked {
                crl.revoke(*s);
            }
            info!("{}: revoked {} pseudonyms of ticket {}", self.cfg.id, revoked.len(), record.ticket.serial);
        }
        let body = PseudonymResolution { ticket: record.ticket, rnd_ik: entry.rnd_ik, revoked };
        SignedEnvelope::seal(req.reply(MessageId::ResolvePseudonymResponse, now, body), &self.key)
    }

    pub fn crl(&self, since_sequence: u64) -> Result<Crl> {
        let (since, latest, serials) = self.crl.read().delta(since_sequence);
        Crl::issue(self.cfg.id.clone(), since, latest, serials, self.clock.now(), &self.key)
    }

    pub fn ocsp(&self, req: &Envelope<OcspRequest>) -> Result<SignedEnvelope<OcspResponse>> {
        req.expect(MessageId::OcspRequest)?;
        let serials = &req.payload.serials;
        if serials.is_empty() {
            return Err(Error::InvalidArgument("empty status query".into()));
        }
        if serials.len() > self.cfg.ocsp_batch_cap {
            return Err(Error::BatchTooLarge(format!("{} serials, cap is {}", serials.len(), self.cfg.ocsp_batch_cap)));
        }
        let crl = self.crl.read();
        let entries = serials
            .iter()
            .map(|s| OcspEntry {
                serial: *s,
                status: if crl.is_revoked(s) {
                    CertStatus::Revoked
                } else if self.ledger.contains_key(s) {
                    CertStatus::Good
                } else {
                    CertStatus::Unknown
                },
            })
            .collect();
        drop(crl);
        let body = OcspResponse { issuer_id: self.cfg.id.clone(), entries };
        SignedEnvelope::seal(req.reply(MessageId::OcspResponse, self.clock.now(), body), &self.key)
    }
}

#[async_trait]
impl PcaApi for Pca {
    fn authority_id(&self) -> &AuthorityId {
        &self.cfg.id
    }

    async fn issue_pseudonyms(
        &self,
        req: &Envelope<PseudonymRequest>,
        solution: Option<&PuzzleSolution>,
    ) -> Result<Envelope<PseudonymResponse>> {
        let _load = self.enter();
        self.admit(&req.to_bytes(), solution)?;
        Pca::issue_pseudonyms(self, req)
    }

    async fn puzzle_step(&self, step: PuzzleStep) -> Result<PuzzleStep> {
        Pca::puzzle_step(self, &step)
    }

    async fn get_crl(&self, req: CrlRequest) -> Result<Crl> {
        self.crl(req.since_sequence)
    }

    async fn ocsp(&self, req: Envelope<OcspRequest>) -> Result<SignedEnvelope<OcspResponse>> {
        Pca::ocsp(self, &req)
    }
}

#[async_trait]
impl PcaResolver for Pca {
    async fn resolve_pseudonym(
        &self,
        req: SignedEnvelope<ResolvePseudonymRequest>,
    ) -> Result<SignedEnvelope<PseudonymResolution>> {
        Pca::resolve_pseudonym(self, &req)
    }
}
