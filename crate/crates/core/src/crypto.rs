//! Signing, hashing, random tokens and the two identifiable-key
//! constructions.
//!
//! Signatures are ECDSA over NIST P-256 with SHA-256, fixed-size `r || s`
//! encoding. Public keys are uncompressed SEC1 points. Both are carried as
//! opaque byte strings so the suite can be swapped without touching callers.
//!
//! Hash preimages use a canonical concatenation: every variable-length field
//! is prefixed with its 4-byte big-endian length and timestamps are 8-byte
//! big-endian epoch seconds.

use std::fmt;

use ring::rand::{SecureRandom, SystemRandom};
use ring::signature::{self, EcdsaKeyPair, KeyPair as _, UnparsedPublicKey};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const DIGEST_LEN: usize = 32;
pub const TOKEN_LEN: usize = 16;
pub const SIGNATURE_LEN: usize = 64;

macro_rules! hex_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(&hex::encode(self.as_bytes()))
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                let raw = hex::decode(&s).map_err(serde::de::Error::custom)?;
                <$ty>::try_from_slice(&raw).map_err(serde::de::Error::custom)
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&hex::encode(self.as_bytes()))
            }
        }
    };
}

/// Fixed-length SHA-256 output.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub [u8; DIGEST_LEN]);

impl Digest {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn try_from_slice(raw: &[u8]) -> Result<Self> {
        let arr: [u8; DIGEST_LEN] =
            raw.try_into().map_err(|_| Error::decode("digest", format!("expected {DIGEST_LEN} bytes, got {}", raw.len())))?;
        Ok(Digest(arr))
    }

    pub fn of(data: &[u8]) -> Self {
        let d = ring::digest::digest(&ring::digest::SHA256, data);
        let mut out = [0u8; DIGEST_LEN];
        out.copy_from_slice(d.as_ref());
        Digest(out)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", &hex::encode(self.0)[..12])
    }
}

hex_serde!(Digest);

/// 128-bit random value. Backs serials, nonces and the identifiable-key
/// randomizers.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RandomToken(pub [u8; TOKEN_LEN]);

impl RandomToken {
    pub fn try_random() -> Result<Self> {
        let mut out = [0u8; TOKEN_LEN];
        SystemRandom::new()
            .fill(&mut out)
            .map_err(|_| Error::Fatal("system entropy source failed".into()))?;
        Ok(RandomToken(out))
    }

    /// Panics if the system entropy source is unavailable.
    pub fn random() -> Self {
        Self::try_random().expect("system entropy source")
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn try_from_slice(raw: &[u8]) -> Result<Self> {
        let arr: [u8; TOKEN_LEN] =
            raw.try_into().map_err(|_| Error::decode("token", format!("expected {TOKEN_LEN} bytes, got {}", raw.len())))?;
        Ok(RandomToken(arr))
    }

    /// The `N + 1` transform responses apply to request nonces.
    pub fn successor(&self) -> Self {
        RandomToken(u128::from_be_bytes(self.0).wrapping_add(1).to_be_bytes())
    }
}

impl fmt::Debug for RandomToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Token({})", &hex::encode(self.0)[..8])
    }
}

hex_serde!(RandomToken);

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicKey(pub Vec<u8>);

impl PublicKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn try_from_slice(raw: &[u8]) -> Result<Self> {
        Ok(PublicKey(raw.to_vec()))
    }

    pub fn verify(&self, message: &[u8], sig: &Signature) -> bool {
        verify(&self.0, message, &sig.0)
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = hex::encode(&self.0);
        write!(f, "PublicKey({})", &h[h.len().saturating_sub(12)..])
    }
}

hex_serde!(PublicKey);

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Signature(pub Vec<u8>);

impl Signature {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn try_from_slice(raw: &[u8]) -> Result<Self> {
        Ok(Signature(raw.to_vec()))
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({} bytes)", self.0.len())
    }
}

hex_serde!(Signature);

/// Private half of a key pair. Has no wire or serde encoding; the only
/// export is [`SigningKey::to_pkcs8`] for an authority's own key file.
pub struct SigningKey {
    inner: EcdsaKeyPair,
    pkcs8: Vec<u8>,
}

impl SigningKey {
    pub fn from_pkcs8(pkcs8: &[u8]) -> Result<Self> {
        let inner = EcdsaKeyPair::from_pkcs8(&signature::ECDSA_P256_SHA256_FIXED_SIGNING, pkcs8, &SystemRandom::new())
            .map_err(|e| Error::Crypto(format!("malformed private key: {e}")))?;
        Ok(SigningKey { inner, pkcs8: pkcs8.to_vec() })
    }

    pub fn to_pkcs8(&self) -> &[u8] {
        &self.pkcs8
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey(self.inner.public_key().as_ref().to_vec())
    }

    pub fn sign(&self, message: &[u8]) -> Result<Signature> {
        let sig = self
            .inner
            .sign(&SystemRandom::new(), message)
            .map_err(|_| Error::Crypto("signing failed".into()))?;
        Ok(Signature(sig.as_ref().to_vec()))
    }
}

impl fmt::Debug for SigningKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SigningKey(..)")
    }
}

#[derive(Debug)]
pub struct KeyPair {
    public: PublicKey,
    private: SigningKey,
}

impl KeyPair {
    pub fn generate() -> Result<Self> {
        let rng = SystemRandom::new();
        let doc = EcdsaKeyPair::generate_pkcs8(&signature::ECDSA_P256_SHA256_FIXED_SIGNING, &rng)
            .map_err(|_| Error::Fatal("key generation failed: entropy source".into()))?;
        Self::from_pkcs8(doc.as_ref())
    }

    pub fn from_pkcs8(pkcs8: &[u8]) -> Result<Self> {
        let private = SigningKey::from_pkcs8(pkcs8)?;
        Ok(KeyPair { public: private.public_key(), private })
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.public
    }

    pub fn signing_key(&self) -> &SigningKey {
        &self.private
    }

    pub fn sign(&self, message: &[u8]) -> Result<Signature> {
        self.private.sign(message)
    }
}

pub fn generate_keypair() -> Result<KeyPair> {
    KeyPair::generate()
}

pub fn sign(private_key: &SigningKey, message: &[u8]) -> Result<Signature> {
    private_key.sign(message)
}

/// Malformed keys or signatures yield `false`.
pub fn verify(public_key: &[u8], message: &[u8], signature: &[u8]) -> bool {
    if signature.len() != SIGNATURE_LEN {
        return false;
    }
    UnparsedPublicKey::new(&signature::ECDSA_P256_SHA256_FIXED, public_key)
        .verify(message, signature)
        .is_ok()
}

/// Incremental builder for canonical hash preimages.
#[derive(Default)]
pub struct Preimage(Vec<u8>);

impl Preimage {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn field(mut self, bytes: &[u8]) -> Self {
        self.0.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
        self.0.extend_from_slice(bytes);
        self
    }

    pub fn time(mut self, t: u64) -> Self {
        self.0.extend_from_slice(&t.to_be_bytes());
        self
    }

    pub fn digest(&self) -> Digest {
        Digest::of(&self.0)
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }
}

/// `H(LTC || t_s || t_e || Rnd)`. For tickets exchanged across domains the
/// encoded foreign ticket takes the place of the LTC.
pub fn compute_ticket_ik(ltc_bytes: &[u8], t_s: u64, t_e: u64, rnd: &RandomToken) -> Result<Digest> {
    if t_s >= t_e {
        return Err(Error::InvalidArgument(format!("ticket interval [{t_s}, {t_e}) is empty")));
    }
    Ok(Preimage::new().field(ltc_bytes).time(t_s).time(t_e).field(rnd.as_bytes()).digest())
}

/// `H(IK_tkt || K || t_s || t_e || Rnd)`.
pub fn compute_pseudonym_ik(
    ik_tkt: &Digest,
    pseudonym_pubkey: &[u8],
    t_s: u64,
    t_e: u64,
    rnd: &RandomToken,
) -> Result<Digest> {
    if t_s >= t_e {
        return Err(Error::InvalidArgument(format!("pseudonym slot [{t_s}, {t_e}) is empty")));
    }
    Ok(Preimage::new()
        .field(ik_tkt.as_bytes())
        .field(pseudonym_pubkey)
        .time(t_s)
        .time(t_e)
        .field(rnd.as_bytes())
        .digest())
}

/// `H(Id || Rnd)`, hiding which authority a ticket is meant for.
pub fn target_digest(authority_id: &str, rnd: &RandomToken) -> Digest {
    Preimage::new().field(authority_id.as_bytes()).field(rnd.as_bytes()).digest()
}
