//! Vehicular public-key infrastructure.
//!
//! A long-term certification authority ([`ltca`]) issues anonymous,
//! single-use tickets to registered vehicles; a pseudonym certification
//! authority ([`pca`]) exchanges a ticket for a batch of short-lived,
//! non-overlapping pseudonyms; a resolution authority ([`ra`]) can map a
//! pseudonym back to its long-term certificate, checking the identifiable-key
//! chain at every hop so that neither issuer can substitute a mapping.
//!
//! The [`vehicle`] module implements the on-board side, including the three
//! acquisition policies. [`harness`] replays mobility traces against live
//! services and [`analyzer`] evaluates what a timing-only observer or a set
//! of colluding authorities can link.

pub mod analyzer;
pub mod api;
pub mod clock;
pub mod crypto;
pub mod error;
pub mod fault;
pub mod harness;
pub mod http;
pub mod interval;
pub mod journal;
pub mod ltca;
pub mod model;
pub mod pca;
pub mod ra;
pub mod registry;
pub mod slots;
pub mod vehicle;
pub mod wire;

pub use error::{Error, ErrorCode, Result};
