use async_trait::async_trait;
use reqwest::Client;

use crate::api::{LtcaApi, LtcaResolver, PcaApi, PcaResolver};
use crate::error::{Error, Result};
use crate::model::{
    AuthorityId, Crl, CrlRequest, Envelope, ExchangeRequest, OcspRequest, OcspResponse, PseudonymRequest,
    PseudonymResolution, PseudonymResponse, PuzzleSolution, PuzzleStep, RegisterRequest, RegisterResponse,
    ResolvePseudonymRequest, ResolveTicketRequest, SignedEnvelope, TicketRequest, TicketResolution, TicketResponse,
    WireError,
};
use crate::wire::{Encoder, Wire};

#[derive(Debug, Clone)]
struct Remote {
    id: AuthorityId,
    base: String,
    client: Client,
}

impl Remote {
    fn new(id: AuthorityId, base: &str) -> Self {
        Remote { id, base: base.trim_end_matches('/').to_string(), client: Client::new() }
    }

    async fn post<T: Wire>(&self, path: &str, body: Vec<u8>) -> Result<T> {
        let url = format!("{}{path}", self.base);
        let resp = self
            .client
            .post(&url)
            .header("content-type", "application/octet-stream")
            .body(body)
            .send()
            .await
            .map_err(|e| Error::Transport(format!("{url}: {e}")))?;
        let ok = resp.status().is_success();
        let bytes = resp.bytes().await.map_err(|e| Error::Transport(format!("{url}: {e}")))?;
        if ok {
            T::from_bytes(&bytes)
        } else {
            Err(WireError::from_bytes(&bytes)?.into())
        }
    }
}

/// LTCA reached over HTTP.
#[derive(Debug, Clone)]
pub struct HttpLtca(Remote);

impl HttpLtca {
    pub fn new(id: impl Into<AuthorityId>, base_url: &str) -> Self {
        HttpLtca(Remote::new(id.into(), base_url))
    }
}

#[async_trait]
impl LtcaApi for HttpLtca {
    fn authority_id(&self) -> &AuthorityId {
        &self.0.id
    }

    async fn register(&self, req: RegisterRequest) -> Result<RegisterResponse> {
        self.0.post("/ltca/register", req.to_bytes()).await
    }

    async fn issue_ticket(&self, req: SignedEnvelope<TicketRequest>) -> Result<Envelope<TicketResponse>> {
        self.0.post("/ltca/ticket", req.to_bytes()).await
    }

    async fn exchange(&self, req: Envelope<ExchangeRequest>) -> Result<Envelope<TicketResponse>> {
        self.0.post("/ltca/exchange", req.to_bytes()).await
    }
}

#[async_trait]
impl LtcaResolver for HttpLtca {
    async fn resolve_ticket(&self, req: SignedEnvelope<ResolveTicketRequest>) -> Result<SignedEnvelope<TicketResolution>> {
        self.0.post("/ltca/resolve", req.to_bytes()).await
    }
}

/// PCA reached over HTTP.
#[derive(Debug, Clone)]
pub struct HttpPca(Remote);

impl HttpPca {
    pub fn new(id: impl Into<AuthorityId>, base_url: &str) -> Self {
        HttpPca(Remote::new(id.into(), base_url))
    }

    /// Body of a pseudonym request: optional solution, then the request bytes
    /// the solution is bound to.
    pub fn pseudonym_body(request_bytes: &[u8], solution: Option<&PuzzleSolution>) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.opt(solution).raw(request_bytes);
        enc.finish()
    }

    /// Sends pre-encoded request bytes; lets load generators skip re-encoding.
    pub async fn send_raw_pseudonym_request(&self, request_bytes: &[u8]) -> Result<Envelope<PseudonymResponse>> {
        self.0.post("/pca/pseudonyms", Self::pseudonym_body(request_bytes, None)).await
    }
}

#[async_trait]
impl PcaApi for HttpPca {
    fn authority_id(&self) -> &AuthorityId {
        &self.0.id
    }

    async fn issue_pseudonyms(
        &self,
        req: &Envelope<PseudonymRequest>,
        solution: Option<&PuzzleSolution>,
    ) -> Result<Envelope<PseudonymResponse>> {
        self.0.post("/pca/pseudonyms", Self::pseudonym_body(&req.to_bytes(), solution)).await
    }

    async fn puzzle_step(&self, step: PuzzleStep) -> Result<PuzzleStep> {
        self.0.post("/pca/puzzle", step.to_bytes()).await
    }

    async fn get_crl(&self, req: CrlRequest) -> Result<Crl> {
        self.0.post("/pca/crl", req.to_bytes()).await
    }

    async fn ocsp(&self, req: Envelope<OcspRequest>) -> Result<SignedEnvelope<OcspResponse>> {
        self.0.post("/pca/ocsp", req.to_bytes()).await
    }
}

#[async_trait]
impl PcaResolver for HttpPca {
    async fn resolve_pseudonym(
        &self,
        req: SignedEnvelope<ResolvePseudonymRequest>,
    ) -> Result<SignedEnvelope<PseudonymResolution>> {
        self.0.post("/pca/resolve", req.to_bytes()).await
    }
}
