//! Service interfaces as seen by callers. Each is implemented directly by the
//! in-process service (`Arc<Ltca>`, `Arc<Pca>`) and by the HTTP clients in
//! [`crate::http`], so vehicles, the RA and the harness are transport-agnostic.

use async_trait::async_trait;

use crate::error::Result;
use crate::model::{
    AuthorityId, Crl, CrlRequest, Envelope, ExchangeRequest, OcspRequest, OcspResponse, PseudonymRequest,
    PseudonymResolution, PseudonymResponse, PuzzleSolution, PuzzleStep, RegisterRequest, RegisterResponse,
    ResolvePseudonymRequest, ResolveTicketRequest, SignedEnvelope, TicketRequest, TicketResolution, TicketResponse,
};

/// Vehicle-facing LTCA operations.
#[async_trait]
pub trait LtcaApi: Send + Sync {
    fn authority_id(&self) -> &AuthorityId;
    async fn register(&self, req: RegisterRequest) -> Result<RegisterResponse>;
    async fn issue_ticket(&self, req: SignedEnvelope<TicketRequest>) -> Result<Envelope<TicketResponse>>;
    async fn exchange(&self, req: Envelope<ExchangeRequest>) -> Result<Envelope<TicketResponse>>;
}

/// RA-facing LTCA operation.
#[async_trait]
pub trait LtcaResolver: Send + Sync {
    async fn resolve_ticket(&self, req: SignedEnvelope<ResolveTicketRequest>) -> Result<SignedEnvelope<TicketResolution>>;
}

/// Vehicle-facing PCA operations.
#[async_trait]
pub trait PcaApi: Send + Sync {
    fn authority_id(&self) -> &AuthorityId;
    async fn issue_pseudonyms(
        &self,
        req: &Envelope<PseudonymRequest>,
        solution: Option<&PuzzleSolution>,
    ) -> Result<Envelope<PseudonymResponse>>;
    async fn puzzle_step(&self, step: PuzzleStep) -> Result<PuzzleStep>;
    async fn get_crl(&self, req: CrlRequest) -> Result<Crl>;
    async fn ocsp(&self, req: Envelope<OcspRequest>) -> Result<SignedEnvelope<OcspResponse>>;
}

/// RA-facing PCA operation.
#[async_trait]
pub trait PcaResolver: Send + Sync {
    async fn resolve_pseudonym(
        &self,
        req: SignedEnvelope<ResolvePseudonymRequest>,
    ) -> Result<SignedEnvelope<PseudonymResolution>>;
}
