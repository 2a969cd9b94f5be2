//! Credentials, protocol messages and configuration shared by every service
//! and the on-board client.
//!
//! All wire types implement [`Wire`](crate::wire::Wire); signed types sign
//! a domain-separated encoding of every field except the signature. The serde
//! derives exist for the JSON debug view and for ledger exports.

mod credentials;
mod ledger;
mod messages;
mod policy;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::crypto::RandomToken;
use crate::error::Result;
use crate::interval::Interval;
use crate::wire::{Decoder, Encoder, Wire};

pub use credentials::{Crl, LongTermCertificate, Pseudonym, SignedBody, Ticket};
pub use ledger::{LtcaLedgerExport, LtcaLedgerRecord, PcaLedgerExport, PcaLedgerRecord, SubjectRef};
pub use messages::*;
pub use policy::{PolicyConfig, PolicyKind};

/// Seconds since the Unix epoch (or since the start of a replayed trace).
pub type Epoch = u64;

/// Clock-skew tolerance for request timestamps, seconds.
pub const DEFAULT_SKEW_TOLERANCE: u64 = 5;

macro_rules! string_id {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                $name(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({:?})", stringify!($name), self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }

        impl Wire for $name {
            fn encode_to(&self, enc: &mut Encoder) {
                enc.str(&self.0);
            }
            fn decode_from(dec: &mut Decoder<'_>) -> Result<Self> {
                Ok($name(dec.str("string")?))
            }
        }
    };
}

string_id!(
    /// Identifier of a certification or resolution authority.
    AuthorityId
);
string_id!(
    /// Opaque vehicle identifier, known only to its home LTCA.
    SubjectId
);

/// Unique serial number of a ticket or pseudonym.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Serial(pub RandomToken);

impl Serial {
    pub fn random() -> Self {
        Serial(RandomToken::random())
    }
}

impl fmt::Display for Serial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl fmt::Debug for Serial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Serial({})", &self.0.to_string()[..8])
    }
}

impl std::str::FromStr for Serial {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        let raw = hex::decode(s).map_err(|e| crate::error::Error::decode("serial", e.to_string()))?;
        Ok(Serial(RandomToken::try_from_slice(&raw)?))
    }
}

impl Wire for Serial {
    fn encode_to(&self, enc: &mut Encoder) {
        self.0.encode_to(enc);
    }
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self> {
        Ok(Serial(dec.get()?))
    }
}

impl Wire for Interval {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.u64(self.start).u64(self.end);
    }
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self> {
        let start = dec.u64("start")?;
        let end = dec.u64("end")?;
        Interval::new(start, end).map_err(|_| crate::error::Error::decode("interval", format!("[{start}, {end}) is empty")))
    }
}

/// Renders any serializable value as pretty JSON. Read-only debug view;
/// signatures are only ever computed over the binary encoding.
pub fn debug_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).unwrap_or_else(|e| format!("<unrenderable: {e}>"))
}
