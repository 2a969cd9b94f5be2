//! Dishonest service wrappers for fault-injection tests.
//!
//! [`SwappingPca`] and [`SwappingLtca`] answer resolution requests with
//! another credential's (honestly signed) ledger entry, the substitution the
//! identifiable keys are meant to expose. [`TamperingPca`] and
//! [`TamperingLtca`] alter issuance responses and re-sign them with the real
//! issuer key, so only the client's identifiable-key checks can notice.

use std::collections::HashMap;
use std::sync::Arc;

use async_trait::async_trait;

use crate::api::{LtcaApi, LtcaResolver, PcaApi, PcaResolver};
use crate::error::{Error, Result};
use crate::ltca::{LedgerSubject, Ltca};
use crate::model::{
    AuthorityId, Crl, CrlRequest, Envelope, ExchangeRequest, OcspRequest, OcspResponse, Pseudonym, PseudonymRequest,
    PseudonymResolution, PseudonymResponse, PuzzleSolution, PuzzleStep, RegisterRequest, RegisterResponse,
    ResolvePseudonymRequest, ResolveTicketRequest, ResolvedSubject, Serial, SignedEnvelope, Ticket, TicketRequest,
    TicketResolution, TicketResponse,
};
use crate::pca::Pca;

/// Resolves pseudonym `a` as if asked about `b` for every `(a, b)` in `swaps`.
pub struct SwappingPca {
    inner: Arc<Pca>,
    swaps: HashMap<Serial, Serial>,
}

impl SwappingPca {
    pub fn new(inner: Arc<Pca>, swaps: HashMap<Serial, Serial>) -> Self {
        SwappingPca { inner, swaps }
    }
}

#[async_trait]
impl PcaResolver for SwappingPca {
    async fn resolve_pseudonym(
        &self,
        req: SignedEnvelope<ResolvePseudonymRequest>,
    ) -> Result<SignedEnvelope<PseudonymResolution>> {
        self.inner.check_ra(&req)?;
        let asked = req.envelope.payload.pseudonym.serial;
        let serial = self.swaps.get(&asked).copied().unwrap_or(asked);
        self.inner.resolve_serial(&req.envelope, &serial)
    }
}

/// Resolves ticket `a` as if asked about `b` for every `(a, b)` in `swaps`.
pub struct SwappingLtca {
    inner: Arc<Ltca>,
    swaps: HashMap<Serial, Serial>,
}

impl SwappingLtca {
    pub fn new(inner: Arc<Ltca>, swaps: HashMap<Serial, Serial>) -> Self {
        SwappingLtca { inner, swaps }
    }
}

#[async_trait]
impl LtcaResolver for SwappingLtca {
    async fn resolve_ticket(&self, req: SignedEnvelope<ResolveTicketRequest>) -> Result<SignedEnvelope<TicketResolution>> {
        let asked = req.envelope.payload.ticket.serial;
        let Some(other) = self.swaps.get(&asked) else {
            return self.inner.resolve_ticket(&req);
        };
        let entry = self.inner.ledger_entry(other).ok_or_else(|| Error::NotFound(format!("ticket {other}")))?;
        let subject = match entry.subject {
            LedgerSubject::Vehicle(id) => ResolvedSubject::Ltc(
                self.inner.certificate(&id).ok_or_else(|| Error::NotFound(format!("subject {id}")))?,
            ),
            LedgerSubject::ForeignTicket(f) => ResolvedSubject::ForeignTicket(f),
        };
        self.inner.seal_resolution(&req.envelope, TicketResolution { subject, rnd_ik: entry.rnd_ik })
    }
}

type PseudonymMutation = Box<dyn Fn(&mut PseudonymResponse) + Send + Sync>;

/// Passes issuance through `mutate`, then re-signs every pseudonym.
pub struct TamperingPca {
    inner: Arc<Pca>,
    mutate: PseudonymMutation,
}

impl TamperingPca {
    pub fn new(inner: Arc<Pca>, mutate: impl Fn(&mut PseudonymResponse) + Send + Sync + 'static) -> Self {
        TamperingPca { inner, mutate: Box::new(mutate) }
    }
}

#[async_trait]
impl PcaApi for TamperingPca {
    fn authority_id(&self) -> &AuthorityId {
        self.inner.id()
    }

    async fn issue_pseudonyms(
        &self,
        req: &Envelope<PseudonymRequest>,
        solution: Option<&PuzzleSolution>,
    ) -> Result<Envelope<PseudonymResponse>> {
        let mut resp = PcaApi::issue_pseudonyms(&*self.inner, req, solution).await?;
        (self.mutate)(&mut resp.payload);
        for p in &mut resp.payload.pseudonyms {
            *p = Pseudonym::issue(p.serial, p.public_key.clone(), p.ik, p.validity, p.issuer_id.clone(), self.inner.key())?;
        }
        Ok(resp)
    }

    async fn puzzle_step(&self, step: PuzzleStep) -> Result<PuzzleStep> {
        self.inner.puzzle_step(&step)
    }

    async fn get_crl(&self, req: CrlRequest) -> Result<Crl> {
        self.inner.crl(req.since_sequence)
    }

    async fn ocsp(&self, req: Envelope<OcspRequest>) -> Result<SignedEnvelope<OcspResponse>> {
        self.inner.ocsp(&req)
    }
}

type TicketMutation = Box<dyn Fn(&TicketRequest, &mut TicketResponse) + Send + Sync>;

/// Passes native ticket issuance through `mutate`, then re-signs the ticket.
pub struct TamperingLtca {
    inner: Arc<Ltca>,
    mutate: TicketMutation,
}

impl TamperingLtca {
    pub fn new(inner: Arc<Ltca>, mutate: impl Fn(&TicketRequest, &mut TicketResponse) + Send + Sync + 'static) -> Self {
        TamperingLtca { inner, mutate: Box::new(mutate) }
    }
}

#[async_trait]
impl LtcaApi for TamperingLtca {
    fn authority_id(&self) -> &AuthorityId {
        self.inner.id()
    }

    async fn register(&self, req: RegisterRequest) -> Result<RegisterResponse> {
        LtcaApi::register(&*self.inner, req).await
    }

    async fn issue_ticket(&self, req: SignedEnvelope<TicketRequest>) -> Result<Envelope<TicketResponse>> {
        let mut resp = self.inner.issue_ticket(&req)?;
        (self.mutate)(&req.envelope.payload, &mut resp.payload);
        let t = &resp.payload.ticket;
        resp.payload.ticket = Ticket::issue(t.serial, t.target_digest, t.ik, t.validity, t.issuer_id.clone(), self.inner.key())?;
        Ok(resp)
    }

    async fn exchange(&self, req: Envelope<ExchangeRequest>) -> Result<Envelope<TicketResponse>> {
        self.inner.exchange_foreign_ticket(&req)
    }
}
