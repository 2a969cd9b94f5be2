//! Resolution authority: pseudonym → ticket at the issuing PCA, then
//! ticket → certificate at the issuing LTCA (with one more LTCA hop per
//! foreign-ticket exchange). Every hop's answer is checked by recomputing the
//! identifiable key it claims to open.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use log::warn;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::api::{LtcaResolver, PcaResolver};
use crate::clock::Clock;
use crate::crypto::{compute_pseudonym_ik, compute_ticket_ik, Digest, KeyPair};
use crate::error::{Error, Result};
use crate::journal::Journal;
use crate::model::{
    AuthorityId, Envelope, Epoch, LongTermCertificate, MessageId, Pseudonym, ResolvePseudonymRequest,
    ResolveTicketRequest, ResolvedSubject, Serial, SignedBody, SignedEnvelope, SubjectId, Ticket,
};
use crate::registry::{Registry, Role};

/// Where to revoke once resolved. The two are independent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevocationPlan {
    pub at_pca: bool,
    pub at_ltca: bool,
}

impl From<bool> for RevocationPlan {
    fn from(both: bool) -> Self {
        RevocationPlan { at_pca: both, at_ltca: both }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HopResult {
    Ticket(Serial),
    ForeignTicket(Serial),
    Certificate(SubjectId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditHop {
    pub authority: AuthorityId,
    pub queried: Serial,
    pub result: HopResult,
    pub expected_ik: Digest,
    pub recomputed_ik: Digest,
}

impl AuditHop {
    pub fn ik_matches(&self) -> bool {
        self.expected_ik == self.recomputed_ik
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditOutcome {
    Resolved(SubjectId),
    Failed { code: u16, detail: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub at: Epoch,
    pub pseudonym: Serial,
    pub plan: RevocationPlan,
    pub hops: Vec<AuditHop>,
    pub revoked_pseudonyms: Vec<Serial>,
    pub outcome: AuditOutcome,
}

#[derive(Debug, Clone)]
pub struct Resolution {
    pub ltc: LongTermCertificate,
    pub trail: AuditRecord,
}

pub struct Ra {
    id: AuthorityId,
    key: KeyPair,
    registry: Arc<Registry>,
    clock: Arc<dyn Clock>,
    pcas: HashMap<AuthorityId, Arc<dyn PcaResolver>>,
    ltcas: HashMap<AuthorityId, Arc<dyn LtcaResolver>>,
    journal: Journal<AuditRecord>,
    trail: Mutex<Vec<AuditRecord>>,
    max_hops: usize,
}

impl std::fmt::Debug for Ra {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Ra").field("id", &self.id).finish_non_exhaustive()
    }
}

struct Attempt {
    hops: Vec<AuditHop>,
    revoked: Vec<Serial>,
}

impl Ra {
    pub fn new(id: impl Into<AuthorityId>, key: KeyPair, registry: Arc<Registry>, clock: Arc<dyn Clock>) -> Self {
        Ra {
            id: id.into(),
            key,
            registry,
            clock,
            pcas: HashMap::new(),
            ltcas: HashMap::new(),
            journal: Journal::memory(),
            trail: Mutex::new(Vec::new()),
            max_hops: 4,
        }
    }

    /// Persists audit records to `path` (append-only).
    pub fn with_audit_log(mut self, path: impl AsRef<Path>) -> Result<Self> {
        let (journal, old) = Journal::open(path)?;
        self.journal = journal;
        *self.trail.lock() = old;
        Ok(self)
    }

    pub fn with_pca(mut self, id: impl Into<AuthorityId>, pca: Arc<dyn PcaResolver>) -> Self {
        self.pcas.insert(id.into(), pca);
        self
    }

    pub fn with_ltca(mut self, id: impl Into<AuthorityId>, ltca: Arc<dyn LtcaResolver>) -> Self {
        self.ltcas.insert(id.into(), ltca);
        self
    }

    pub fn id(&self) -> &AuthorityId {
        &self.id
    }

    pub fn audit_trail(&self) -> Vec<AuditRecord> {
        self.trail.lock().clone()
    }

    pub async fn resolve(&self, pseudonym: &Pseudonym, plan: impl Into<RevocationPlan>) -> Result<Resolution> {
        let plan = plan.into();
        let mut attempt = Attempt { hops: Vec::new(), revoked: Vec::new() };
        let result = self.run(pseudonym, plan, &mut attempt).await;
        let outcome = match &result {
            Ok(ltc) => AuditOutcome::Resolved(ltc.subject_id.clone()),
            Err(e) => {
                warn!("{}: resolution of {} failed: {e}", self.id, pseudonym.serial);
                AuditOutcome::Failed { code: e.code() as u16, detail: e.to_string() }
            }
        };
        let record = AuditRecord {
            at: self.clock.now(),
            pseudonym: pseudonym.serial,
            plan,
            hops: attempt.hops,
            revoked_pseudonyms: attempt.revoked,
            outcome,
        };
        self.journal.append(&record)?;
        self.trail.lock().push(record.clone());
        result.map(|ltc| Resolution { ltc, trail: record })
    }

    async fn run(&self, pseudonym: &Pseudonym, plan: RevocationPlan, attempt: &mut Attempt) -> Result<LongTermCertificate> {
        let pca_id = &pseudonym.issuer_id;
        let pca_key = self.registry.key_for(pca_id, Role::Pca)?;
        if !pseudonym.verify_signature(pca_key) {
            return Err(Error::Authentication(format!("pseudonym {} does not verify under {pca_id}", pseudonym.serial)));
        }
        let pca = self.pcas.get(pca_id).ok_or_else(|| Error::NotFound(format!("no endpoint for {pca_id}")))?;

        let env = Envelope::new(
            MessageId::ResolvePseudonymRequest,
            self.clock.now(),
            ResolvePseudonymRequest { pseudonym: pseudonym.clone(), revoke: plan.at_pca },
        );
        let nonce = env.nonce;
        let resp = pca.resolve_pseudonym(SignedEnvelope::seal(env, &self.key)?).await?;
        if !resp.verify(pca_key) {
            return Err(Error::ResponseIntegrity(format!("resolution answer is not signed by {pca_id}")));
        }
        resp.envelope.answers(MessageId::ResolvePseudonymResponse, &nonce)?;
        let body = resp.envelope.payload;
        attempt.revoked = body.revoked;

        let mut ticket = body.ticket;
        let v = pseudonym.validity;
        let recomputed = compute_pseudonym_ik(&ticket.ik, pseudonym.public_key.as_bytes(), v.start, v.end, &body.rnd_ik)?;
        attempt.hops.push(AuditHop {
            authority: pca_id.clone(),
            queried: pseudonym.serial,
            result: HopResult::Ticket(ticket.serial),
            expected_ik: pseudonym.ik,
            recomputed_ik: recomputed,
        });
        if recomputed != pseudonym.ik {
            return Err(Error::TamperEvidence {
                authority: pca_id.clone(),
                detail: format!("ticket {} does not open the identifiable key of {}", ticket.serial, pseudonym.serial),
            });
        }
        self.verify_ticket(&ticket, pca_id)?;

        for _ in 0..self.max_hops {
            let ltca_id = ticket.issuer_id.clone();
            let ltca_key = self.registry.key_for(&ltca_id, Role::Ltca)?;
            let ltca = self.ltcas.get(&ltca_id).ok_or_else(|| Error::NotFound(format!("no endpoint for {ltca_id}")))?;
            let env = Envelope::new(
                MessageId::ResolveTicketRequest,
                self.clock.now(),
                ResolveTicketRequest { ticket: ticket.clone(), revoke: plan.at_ltca },
            );
            let nonce = env.nonce;
            let resp = ltca.resolve_ticket(SignedEnvelope::seal(env, &self.key)?).await?;
            if !resp.verify(ltca_key) {
                return Err(Error::ResponseIntegrity(format!("resolution answer is not signed by {ltca_id}")));
            }
            resp.envelope.answers(MessageId::ResolveTicketResponse, &nonce)?;
            let body = resp.envelope.payload;
            let recomputed = compute_ticket_ik(&body.subject.ik_bytes(), ticket.validity.start, ticket.validity.end, &body.rnd_ik)?;
            attempt.hops.push(AuditHop {
                authority: ltca_id.clone(),
                queried: ticket.serial,
                result: match &body.subject {
                    ResolvedSubject::Ltc(ltc) => HopResult::Certificate(ltc.subject_id.clone()),
                    ResolvedSubject::ForeignTicket(f) => HopResult::ForeignTicket(f.serial),
                },
                expected_ik: ticket.ik,
                recomputed_ik: recomputed,
            });
            if recomputed != ticket.ik {
                return Err(Error::TamperEvidence {
                    authority: ltca_id.clone(),
                    detail: format!("returned subject does not open the identifiable key of ticket {}", ticket.serial),
                });
            }
            match body.subject {
                ResolvedSubject::Ltc(ltc) => {
                    if ltc.issuer_id != ltca_id || !ltc.verify_signature(ltca_key) {
                        return Err(Error::TamperEvidence {
                            authority: ltca_id,
                            detail: format!("certificate of {} is not signed by this LTCA", ltc.subject_id),
                        });
                    }
                    return Ok(ltc);
                }
                ResolvedSubject::ForeignTicket(f) => {
                    self.verify_ticket(&f, &ltca_id)?;
                    ticket = f;
                }
            }
        }
        Err(Error::Policy(format!("resolution exceeded {} LTCA hops", self.max_hops)))
    }

    /// A ticket handed over by `via` must carry a valid signature of its
    /// stated issuer; otherwise `via` fabricated it.
    fn verify_ticket(&self, ticket: &Ticket, via: &AuthorityId) -> Result<()> {
        let ok = self.registry.key_for(&ticket.issuer_id, Role::Ltca).is_ok_and(|k| ticket.verify_signature(k));
        if !ok {
            return Err(Error::TamperEvidence {
                authority: via.clone(),
                detail: format!("ticket {} does not verify under {}", ticket.serial, ticket.issuer_id),
            });
        }
        Ok(())
    }
}
