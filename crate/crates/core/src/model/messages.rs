use serde::{Deserialize, Serialize};

use super::{AuthorityId, Epoch, LongTermCertificate, Pseudonym, Serial, SubjectId, Ticket};
use crate::crypto::{Digest, KeyPair, PublicKey, RandomToken, Signature};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::wire::{in_field, Decoder, Encoder, Wire};
use crate::wire_struct;

#[repr(u8)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MessageId {
    RegisterRequest = 1,
    RegisterResponse = 2,
    TicketRequest = 3,
    TicketResponse = 4,
    ExchangeRequest = 5,
    PseudonymRequest = 6,
    PseudonymResponse = 7,
    ResolvePseudonymRequest = 8,
    ResolvePseudonymResponse = 9,
    ResolveTicketRequest = 10,
    ResolveTicketResponse = 11,
    CrlRequest = 12,
    OcspRequest = 13,
    OcspResponse = 14,
}

impl MessageId {
    fn from_u8(v: u8) -> Option<Self> {
        use MessageId::*;
        Some(match v {
            1 => RegisterRequest,
            2 => RegisterResponse,
            3 => TicketRequest,
            4 => TicketResponse,
            5 => ExchangeRequest,
            6 => PseudonymRequest,
            7 => PseudonymResponse,
            8 => ResolvePseudonymRequest,
            9 => ResolvePseudonymResponse,
            10 => ResolveTicketRequest,
            11 => ResolveTicketResponse,
            12 => CrlRequest,
            13 => OcspRequest,
            14 => OcspResponse,
            _ => return None,
        })
    }
}

impl Wire for MessageId {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.u8(*self as u8);
    }
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self> {
        let v = dec.u8("message_id")?;
        MessageId::from_u8(v).ok_or_else(|| Error::decode("message_id", format!("unknown id {v}")))
    }
}

/// Request or response frame. Responses carry the request nonce's successor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub id: MessageId,
    pub nonce: RandomToken,
    pub timestamp: Epoch,
    pub payload: T,
}

impl<T> Envelope<T> {
    pub fn new(id: MessageId, timestamp: Epoch, payload: T) -> Self {
        Envelope { id, nonce: RandomToken::random(), timestamp, payload }
    }

    /// Response frame answering `self`.
    pub fn reply<R>(&self, id: MessageId, timestamp: Epoch, payload: R) -> Envelope<R> {
        Envelope { id, nonce: self.nonce.successor(), timestamp, payload }
    }

    pub fn expect(&self, id: MessageId) -> Result<()> {
        if self.id != id {
            return Err(Error::InvalidArgument(format!("expected {id:?}, got {:?}", self.id)));
        }
        Ok(())
    }

    /// Checks that `self` answers a request sent with `nonce`.
    pub fn answers(&self, id: MessageId, nonce: &RandomToken) -> Result<()> {
        if self.id != id {
            return Err(Error::ResponseIntegrity(format!("expected {id:?}, got {:?}", self.id)));
        }
        if self.nonce != nonce.successor() {
            return Err(Error::ResponseIntegrity("response nonce is not request nonce + 1".into()));
        }
        Ok(())
    }
}

impl<T: Wire> Wire for Envelope<T> {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.put(&self.id).put(&self.nonce).u64(self.timestamp).put(&self.payload);
    }
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self> {
        Ok(Envelope {
            id: dec.get()?,
            nonce: dec.get().map_err(|e| in_field(e, "nonce"))?,
            timestamp: dec.u64("timestamp")?,
            payload: dec.get().map_err(|e| in_field(e, "payload"))?,
        })
    }
}

const ENVELOPE_TAG: &[u8] = b"vpki/envelope/v1\0";

/// Envelope signed as a whole by the sender.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedEnvelope<T> {
    pub envelope: Envelope<T>,
    pub signature: Signature,
}

impl<T: Wire> SignedEnvelope<T> {
    fn signed_bytes(envelope: &Envelope<T>) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.raw(ENVELOPE_TAG).put(envelope);
        enc.finish()
    }

    pub fn seal(envelope: Envelope<T>, key: &KeyPair) -> Result<Self> {
        let signature = key.sign(&Self::signed_bytes(&envelope))?;
        Ok(SignedEnvelope { envelope, signature })
    }

    pub fn verify(&self, key: &PublicKey) -> bool {
        key.verify(&Self::signed_bytes(&self.envelope), &self.signature)
    }
}

impl<T: Wire> Wire for SignedEnvelope<T> {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.put(&self.envelope).put(&self.signature);
    }
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self> {
        Ok(SignedEnvelope {
            envelope: dec.get()?,
            signature: dec.get().map_err(|e| in_field(e, "signature"))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterRequest {
    pub subject_id: SubjectId,
    pub public_key: PublicKey,
}
wire_struct!(RegisterRequest { subject_id, public_key });

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterResponse {
    pub ltc: LongTermCertificate,
}
wire_struct!(RegisterResponse { ltc });

/// Ticket request, signed by the vehicle's long-term key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TicketRequest {
    pub ltc: LongTermCertificate,
    pub target_digest: Digest,
    pub validity: Interval,
}
wire_struct!(TicketRequest { ltc, target_digest, validity });

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TicketResponse {
    pub ticket: Ticket,
    pub rnd_ik: RandomToken,
}
wire_struct!(TicketResponse { ticket, rnd_ik });

/// Swaps a foreign ticket for one native to the receiving domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeRequest {
    pub foreign_ticket: Ticket,
    /// Opens `foreign_ticket.target_digest` for the receiving LTCA.
    pub rnd_target: RandomToken,
    /// Hidden target of the new ticket (a PCA of this domain).
    pub target_digest: Digest,
    pub validity: Interval,
}
wire_struct!(ExchangeRequest { foreign_ticket, rnd_target, target_digest, validity });

/// Pseudonym public key signed by its own private key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfSignedKey {
    pub public_key: PublicKey,
    pub proof: Signature,
}
wire_struct!(SelfSignedKey { public_key, proof });

const POSSESSION_TAG: &[u8] = b"vpki/possession/v1\0";

impl SelfSignedKey {
    pub fn create(key: &KeyPair) -> Result<Self> {
        let public_key = key.public_key().clone();
        let proof = key.sign(&Self::message(&public_key))?;
        Ok(SelfSignedKey { public_key, proof })
    }

    fn message(public_key: &PublicKey) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.raw(POSSESSION_TAG).put(public_key);
        enc.finish()
    }

    pub fn verify(&self) -> bool {
        self.public_key.verify(&Self::message(&self.public_key), &self.proof)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudonymRequest {
    pub ticket: Ticket,
    /// Opens `ticket.target_digest` for the receiving PCA.
    pub rnd_target: RandomToken,
    pub validity: Interval,
    pub keys: Vec<SelfSignedKey>,
}
wire_struct!(PseudonymRequest { ticket, rnd_target, validity, keys });

/// Pseudonyms in slot order, with the per-pseudonym IK randomness alongside
/// rather than inside the broadcast certificates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudonymResponse {
    pub pseudonyms: Vec<Pseudonym>,
    pub rnd_iks: Vec<RandomToken>,
}
wire_struct!(PseudonymResponse { pseudonyms, rnd_iks });

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvePseudonymRequest {
    pub pseudonym: Pseudonym,
    pub revoke: bool,
}
wire_struct!(ResolvePseudonymRequest { pseudonym, revoke });

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudonymResolution {
    pub ticket: Ticket,
    pub rnd_ik: RandomToken,
    /// Serials newly placed on the CRL by this call.
    pub revoked: Vec<Serial>,
}
wire_struct!(PseudonymResolution { ticket, rnd_ik, revoked });

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolveTicketRequest {
    pub ticket: Ticket,
    pub revoke: bool,
}
wire_struct!(ResolveTicketRequest { ticket, revoke });

/// What an LTCA ledger maps a ticket back to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResolvedSubject {
    /// Home-domain ticket: the requesting vehicle's certificate.
    Ltc(LongTermCertificate),
    /// Ticket obtained by exchange: the foreign ticket it replaced.
    ForeignTicket(Ticket),
}

impl ResolvedSubject {
    /// Bytes the ticket's IK was computed over.
    pub fn ik_bytes(&self) -> Vec<u8> {
        match self {
            ResolvedSubject::Ltc(ltc) => ltc.to_bytes(),
            ResolvedSubject::ForeignTicket(t) => t.to_bytes(),
        }
    }
}

impl Wire for ResolvedSubject {
    fn encode_to(&self, enc: &mut Encoder) {
        match self {
            ResolvedSubject::Ltc(ltc) => enc.u8(0).put(ltc),
            ResolvedSubject::ForeignTicket(t) => enc.u8(1).put(t),
        };
    }
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self> {
        match dec.u8("subject")? {
            0 => Ok(ResolvedSubject::Ltc(dec.get().map_err(|e| in_field(e, "ltc"))?)),
            1 => Ok(ResolvedSubject::ForeignTicket(dec.get().map_err(|e| in_field(e, "foreign_ticket"))?)),
            v => Err(Error::decode("subject", format!("unknown variant {v}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TicketResolution {
    pub subject: ResolvedSubject,
    pub rnd_ik: RandomToken,
}
wire_struct!(TicketResolution { subject, rnd_ik });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrlRequest {
    pub since_sequence: u64,
}
wire_struct!(CrlRequest { since_sequence });

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcspRequest {
    pub serials: Vec<Serial>,
}
wire_struct!(OcspRequest { serials });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertStatus {
    Good,
    Revoked,
    Unknown,
}

impl Wire for CertStatus {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.u8(match self {
            CertStatus::Good => 0,
            CertStatus::Revoked => 1,
            CertStatus::Unknown => 2,
        });
    }
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self> {
        match dec.u8("status")? {
            0 => Ok(CertStatus::Good),
            1 => Ok(CertStatus::Revoked),
            2 => Ok(CertStatus::Unknown),
            v => Err(Error::decode("status", format!("unknown status {v}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcspEntry {
    pub serial: Serial,
    pub status: CertStatus,
}
wire_struct!(OcspEntry { serial, status });

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcspResponse {
    pub issuer_id: AuthorityId,
    pub entries: Vec<OcspEntry>,
}
wire_struct!(OcspResponse { issuer_id, entries });

/// Refusal that tells the client how to earn admission. `stage_tokens`
/// holds the first-stage token; later ones come from [`PuzzleStep`] calls.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PuzzleChallenge {
    pub difficulty: u8,
    pub bound_to: Digest,
    pub issued_at: Epoch,
    pub stage_tokens: Vec<Digest>,
}
wire_struct!(PuzzleChallenge { difficulty, bound_to, issued_at, stage_tokens });

/// One tour stage: present token `stage`, receive token `stage + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PuzzleStep {
    pub bound_to: Digest,
    pub issued_at: Epoch,
    pub stage: u8,
    pub token: Digest,
}
wire_struct!(PuzzleStep { bound_to, issued_at, stage, token });

/// Final token of a completed tour, attached to the resubmitted request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PuzzleSolution {
    pub issued_at: Epoch,
    pub token: Digest,
}
wire_struct!(PuzzleSolution { issued_at, token });

/// Error body of a refused remote call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireError {
    pub code: u16,
    pub detail: String,
    pub challenge: Option<PuzzleChallenge>,
}
wire_struct!(WireError { code, detail, challenge });

impl From<&Error> for WireError {
    fn from(e: &Error) -> Self {
        let challenge = match e {
            Error::PuzzleRequired(c) => Some((**c).clone()),
            _ => None,
        };
        WireError { code: e.code() as u16, detail: e.detail(), challenge }
    }
}

impl From<WireError> for Error {
    fn from(w: WireError) -> Self {
        Error::from_remote(w.code, w.detail, w.challenge)
    }
}
