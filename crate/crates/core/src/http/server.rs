use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::Router;
use log::debug;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::Semaphore;

use crate::error::{Error, ErrorCode, Result};
use crate::ltca::Ltca;
use crate::model::{PuzzleSolution, WireError};
use crate::pca::Pca;
use crate::wire::{Decoder, Wire};

/// Caps the number of requests doing signature work at once; the rest wait
/// on the semaphore instead of piling onto the blocking pool.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ServerLimits {
    pub max_concurrent: usize,
}

impl Default for ServerLimits {
    fn default() -> Self {
        let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
        ServerLimits { max_concurrent: cores * 2 }
    }
}

fn status_for(code: ErrorCode) -> StatusCode {
    match code {
        ErrorCode::InvalidArgument | ErrorCode::Decode | ErrorCode::BatchTooLarge => StatusCode::BAD_REQUEST,
        ErrorCode::Authentication => StatusCode::UNAUTHORIZED,
        ErrorCode::Authorization => StatusCode::FORBIDDEN,
        ErrorCode::NotFound => StatusCode::NOT_FOUND,
        ErrorCode::Conflict | ErrorCode::Replay | ErrorCode::SybilRejection => StatusCode::CONFLICT,
        ErrorCode::PuzzleRequired => StatusCode::TOO_MANY_REQUESTS,
        ErrorCode::Io | ErrorCode::Fatal | ErrorCode::Crypto | ErrorCode::Transport => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

fn reply(result: Result<Vec<u8>>) -> Response {
    match result {
        Ok(body) => (StatusCode::OK, body).into_response(),
        Err(e) => {
            debug!("refusing request: {e}");
            (status_for(e.code()), WireError::from(&e).to_bytes()).into_response()
        }
    }
}

struct Shared<S> {
    service: Arc<S>,
    permits: Semaphore,
}

type St<S> = State<Arc<Shared<S>>>;

/// Decodes `body` and runs `f` on the blocking pool under a permit.
async fn run<S, Req, Resp, F>(shared: &Shared<S>, body: Bytes, f: F) -> Result<Vec<u8>>
where
    S: Send + Sync + 'static,
    Req: Wire + Send + 'static,
    Resp: Wire + Send + 'static,
    F: FnOnce(&S, Req) -> Result<Resp> + Send + 'static,
{
    let _permit = shared.permits.acquire().await.map_err(|_| Error::Fatal("server shutting down".into()))?;
    let service = shared.service.clone();
    tokio::task::spawn_blocking(move || {
        let req = Req::from_bytes(&body)?;
        f(&service, req).map(|r| r.to_bytes())
    })
    .await
    .map_err(|e| Error::Fatal(format!("handler panicked: {e}")))?
}

macro_rules! handler {
    ($name:ident, $svc:ty, |$s:ident, $req:ident: $ty:ty| $body:expr) => {
        async fn $name(State(shared): St<$svc>, body: Bytes) -> Response {
            reply(run(&shared, body, |$s: &$svc, $req: $ty| $body).await)
        }
    };
}

use crate::model::{
    CrlRequest, Envelope, ExchangeRequest, OcspRequest, PuzzleStep, RegisterRequest, RegisterResponse,
    ResolvePseudonymRequest, ResolveTicketRequest, SignedEnvelope, TicketRequest,
};

handler!(ltca_register, Ltca, |s, r: RegisterRequest| Ok(RegisterResponse { ltc: s.register_vehicle(r.subject_id, r.public_key)? }));
handler!(ltca_ticket, Ltca, |s, r: SignedEnvelope<TicketRequest>| s.issue_ticket(&r));
handler!(ltca_exchange, Ltca, |s, r: Envelope<ExchangeRequest>| s.exchange_foreign_ticket(&r));
handler!(ltca_resolve, Ltca, |s, r: SignedEnvelope<ResolveTicketRequest>| s.resolve_ticket(&r));
handler!(pca_crl, Pca, |s, r: CrlRequest| s.crl(r.since_sequence));
handler!(pca_ocsp, Pca, |s, r: Envelope<OcspRequest>| s.ocsp(&r));
handler!(pca_resolve, Pca, |s, r: SignedEnvelope<ResolvePseudonymRequest>| s.resolve_pseudonym(&r));

// Puzzle traffic never waits for a permit: it is a single HMAC.
async fn pca_puzzle(State(shared): St<Pca>, body: Bytes) -> Response {
    reply(PuzzleStep::from_bytes(&body).and_then(|s| shared.service.puzzle_step(&s)).map(|s| s.to_bytes()))
}

async fn pca_pseudonyms(State(shared): St<Pca>, body: Bytes) -> Response {
    let pca = shared.service.clone();
    let _load = pca.enter();
    let mut dec = Decoder::new(&body);
    let split = dec.opt::<PuzzleSolution>("solution").and_then(|sol| {
        let n = dec.remaining();
        Ok((sol, dec.take(n, "request")?.len()))
    });
    let (solution, len) = match split {
        Ok(v) => v,
        Err(e) => return reply(Err(e)),
    };
    let request = body.slice(body.len() - len..);
    // Admission runs before decoding and before taking a permit.
    if let Err(e) = pca.admit(&request, solution.as_ref()) {
        return reply(Err(e));
    }
    reply(run(&shared, request, |s: &Pca, r| s.issue_pseudonyms(&r)).await)
}

fn shared<S>(service: Arc<S>, limits: &ServerLimits) -> Arc<Shared<S>> {
    Arc::new(Shared { service, permits: Semaphore::new(limits.max_concurrent.max(1)) })
}

pub fn ltca_router(ltca: Arc<Ltca>, limits: &ServerLimits) -> Router {
    Router::new()
        .route("/ltca/register", post(ltca_register))
        .route("/ltca/ticket", post(ltca_ticket))
        .route("/ltca/exchange", post(ltca_exchange))
        .route("/ltca/resolve", post(ltca_resolve))
        .with_state(shared(ltca, limits))
}

pub fn pca_router(pca: Arc<Pca>, limits: &ServerLimits) -> Router {
    Router::new()
        .route("/pca/pseudonyms", post(pca_pseudonyms))
        .route("/pca/puzzle", post(pca_puzzle))
        .route("/pca/crl", post(pca_crl))
        .route("/pca/ocsp", post(pca_ocsp))
        .route("/pca/resolve", post(pca_resolve))
        .with_state(shared(pca, limits))
}

pub async fn bind(addr: &str) -> Result<TcpListener> {
    Ok(TcpListener::bind(addr).await?)
}

/// Serves `router` on `listener` until the task is dropped.
pub async fn serve(listener: TcpListener, router: Router) -> Result<()> {
    axum::serve(listener, router).await?;
    Ok(())
}

/// Binds an ephemeral loopback port and serves `router` in the background.
pub async fn spawn_local(router: Router) -> Result<(SocketAddr, tokio::task::JoinHandle<Result<()>>)> {
    let listener = bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    Ok((addr, tokio::spawn(serve(listener, router))))
}
