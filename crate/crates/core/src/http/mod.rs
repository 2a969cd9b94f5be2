//! HTTP transport. Bodies are the canonical wire encoding; refusals carry
//! an encoded [`WireError`](crate::model::WireError) with a non-2xx status.
//!
//! | route | body | reply |
//! |---|---|---|
//! | `POST /ltca/register` | `RegisterRequest` | `RegisterResponse` |
//! | `POST /ltca/ticket` | `SignedEnvelope<TicketRequest>` | `Envelope<TicketResponse>` |
//! | `POST /ltca/exchange` | `Envelope<ExchangeRequest>` | `Envelope<TicketResponse>` |
//! | `POST /ltca/resolve` | `SignedEnvelope<ResolveTicketRequest>` | `SignedEnvelope<TicketResolution>` |
//! | `POST /pca/pseudonyms` | `Option<PuzzleSolution>` then raw `Envelope<PseudonymRequest>` | `Envelope<PseudonymResponse>` |
//! | `POST /pca/puzzle` | `PuzzleStep` | `PuzzleStep` |
//! | `POST /pca/crl` | `CrlRequest` | `Crl` |
//! | `POST /pca/ocsp` | `Envelope<OcspRequest>` | `SignedEnvelope<OcspResponse>` |
//! | `POST /pca/resolve` | `SignedEnvelope<ResolvePseudonymRequest>` | `SignedEnvelope<PseudonymResolution>` |

pub mod client;
pub mod server;

pub use client::{HttpLtca, HttpPca};
pub use server::{bind, ltca_router, pca_router, serve, spawn_local, ServerLimits};
