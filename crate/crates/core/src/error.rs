use thiserror::Error;

use crate::model::{AuthorityId, PuzzleChallenge};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed {field}: {reason}")]
    Decode { field: String, reason: String },
    #[error("crypto failure: {0}")]
    Crypto(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("authentication failed: {0}")]
    Authentication(String),
    #[error("not authorized: {0}")]
    Authorization(String),
    #[error("sybil guard rejected request: {0}")]
    SybilRejection(String),
    #[error("stale or future timestamp: {0}")]
    Freshness(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("ticket targets a different authority: {0}")]
    WrongTarget(String),
    #[error("replayed credential: {0}")]
    Replay(String),
    #[error("policy violation: {0}")]
    Policy(String),
    #[error("proof of possession failed: {0}")]
    Possession(String),
    #[error("slot count mismatch: {0}")]
    Arity(String),
    #[error("tamper evidence against {authority}: {detail}")]
    TamperEvidence { authority: AuthorityId, detail: String },
    #[error("response failed verification: {0}")]
    ResponseIntegrity(String),
    #[error("puzzle required (difficulty {})", .0.difficulty)]
    PuzzleRequired(Box<PuzzleChallenge>),
    #[error("batch too large: {0}")]
    BatchTooLarge(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("fatal: {0}")]
    Fatal(String),
}

/// Stable numeric codes. Shared by the HTTP error body and the C ABI.
#[repr(u16)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorCode {
    InvalidArgument = 1,
    Decode = 2,
    Crypto = 3,
    Conflict = 4,
    Authentication = 5,
    Authorization = 6,
    SybilRejection = 7,
    Freshness = 8,
    NotFound = 9,
    WrongTarget = 10,
    Replay = 11,
    Policy = 12,
    Possession = 13,
    Arity = 14,
    TamperEvidence = 15,
    ResponseIntegrity = 16,
    PuzzleRequired = 17,
    BatchTooLarge = 18,
    Transport = 19,
    Io = 20,
    Fatal = 21,
}

impl ErrorCode {
    pub fn from_u16(v: u16) -> Option<Self> {
        use ErrorCode::*;
        Some(match v {
            1 => InvalidArgument,
            2 => Decode,
            3 => Crypto,
            4 => Conflict,
            5 => Authentication,
            6 => Authorization,
            7 => SybilRejection,
            8 => Freshness,
            9 => NotFound,
            10 => WrongTarget,
            11 => Replay,
            12 => Policy,
            13 => Possession,
            14 => Arity,
            15 => TamperEvidence,
            16 => ResponseIntegrity,
            17 => PuzzleRequired,
            18 => BatchTooLarge,
            19 => Transport,
            20 => Io,
            21 => Fatal,
            _ => return None,
        })
    }
}

impl Error {
    pub fn decode(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Decode { field: field.into(), reason: reason.into() }
    }

    pub fn code(&self) -> ErrorCode {
        match self {
            Error::InvalidArgument(_) => ErrorCode::InvalidArgument,
            Error::Decode { .. } => ErrorCode::Decode,
            Error::Crypto(_) => ErrorCode::Crypto,
            Error::Conflict(_) => ErrorCode::Conflict,
            Error::Authentication(_) => ErrorCode::Authentication,
            Error::Authorization(_) => ErrorCode::Authorization,
            Error::SybilRejection(_) => ErrorCode::SybilRejection,
            Error::Freshness(_) => ErrorCode::Freshness,
            Error::NotFound(_) => ErrorCode::NotFound,
            Error::WrongTarget(_) => ErrorCode::WrongTarget,
            Error::Replay(_) => ErrorCode::Replay,
            Error::Policy(_) => ErrorCode::Policy,
            Error::Possession(_) => ErrorCode::Possession,
            Error::Arity(_) => ErrorCode::Arity,
            Error::TamperEvidence { .. } => ErrorCode::TamperEvidence,
            Error::ResponseIntegrity(_) => ErrorCode::ResponseIntegrity,
            Error::PuzzleRequired(_) => ErrorCode::PuzzleRequired,
            Error::BatchTooLarge(_) => ErrorCode::BatchTooLarge,
            Error::Transport(_) => ErrorCode::Transport,
            Error::Io(_) => ErrorCode::Io,
            Error::Fatal(_) => ErrorCode::Fatal,
        }
    }

    /// Message part as carried over the wire, without the variant prefix.
    pub fn detail(&self) -> String {
        match self {
            Error::InvalidArgument(m)
            | Error::Crypto(m)
            | Error::Conflict(m)
            | Error::Authentication(m)
            | Error::Authorization(m)
            | Error::SybilRejection(m)
            | Error::Freshness(m)
            | Error::NotFound(m)
            | Error::WrongTarget(m)
            | Error::Replay(m)
            | Error::Policy(m)
            | Error::Possession(m)
            | Error::Arity(m)
            | Error::ResponseIntegrity(m)
            | Error::BatchTooLarge(m)
            | Error::Transport(m)
            | Error::Fatal(m) => m.clone(),
            Error::Decode { field, reason } => format!("{field}: {reason}"),
            Error::TamperEvidence { authority, detail } => format!("{authority}: {detail}"),
            Error::PuzzleRequired(c) => format!("difficulty {}", c.difficulty),
            Error::Io(e) => e.to_string(),
        }
    }

    /// Rebuilds an error received from a remote peer.
    pub fn from_remote(code: u16, detail: String, challenge: Option<PuzzleChallenge>) -> Self {
        let Some(code) = ErrorCode::from_u16(code) else {
            return Error::Transport(format!("unknown remote error code {code}: {detail}"));
        };
        match code {
            ErrorCode::InvalidArgument => Error::InvalidArgument(detail),
            ErrorCode::Decode => {
                let (field, reason) = detail.split_once(": ").unwrap_or(("body", detail.as_str()));
                Error::decode(field, reason)
            }
            ErrorCode::Crypto => Error::Crypto(detail),
            ErrorCode::Conflict => Error::Conflict(detail),
            ErrorCode::Authentication => Error::Authentication(detail),
            ErrorCode::Authorization => Error::Authorization(detail),
            ErrorCode::SybilRejection => Error::SybilRejection(detail),
            ErrorCode::Freshness => Error::Freshness(detail),
            ErrorCode::NotFound => Error::NotFound(detail),
            ErrorCode::WrongTarget => Error::WrongTarget(detail),
            ErrorCode::Replay => Error::Replay(detail),
            ErrorCode::Policy => Error::Policy(detail),
            ErrorCode::Possession => Error::Possession(detail),
            ErrorCode::Arity => Error::Arity(detail),
            ErrorCode::TamperEvidence => {
                let (authority, detail) = detail.split_once(": ").unwrap_or(("unknown", detail.as_str()));
                Error::TamperEvidence { authority: AuthorityId::new(authority), detail: detail.to_string() }
            }
            ErrorCode::ResponseIntegrity => Error::ResponseIntegrity(detail),
            ErrorCode::PuzzleRequired => match challenge {
                Some(c) => Error::PuzzleRequired(Box::new(c)),
                None => Error::Transport("puzzle required without a challenge".into()),
            },
            ErrorCode::BatchTooLarge => Error::BatchTooLarge(detail),
            ErrorCode::Transport => Error::Transport(detail),
            ErrorCode::Io => Error::Io(std::io::Error::other(detail)),
            ErrorCode::Fatal => Error::Fatal(detail),
        }
    }
}
