use serde::{Deserialize, Serialize};

use super::{AuthorityId, Epoch, Serial, SubjectId};
use crate::crypto::{Digest, KeyPair, PublicKey, Signature};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::wire::{in_field, Decoder, Encoder, Wire};

/// A value signed over a tagged encoding of all its fields except the
/// signature itself.
pub trait SignedBody {
    const TAG: &'static [u8];

    fn encode_body(&self, enc: &mut Encoder);
    fn signature(&self) -> &Signature;

    fn body_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.raw(Self::TAG);
        self.encode_body(&mut enc);
        enc.finish()
    }

    fn verify_signature(&self, key: &PublicKey) -> bool {
        key.verify(&self.body_bytes(), self.signature())
    }
}

fn sign_body<T: SignedBody>(value: &T, key: &KeyPair) -> Result<Signature> {
    key.sign(&value.body_bytes())
}

macro_rules! signed_wire {
    ($name:ident { $($field:ident),* $(,)? }) => {
        impl SignedBody for $name {
            const TAG: &'static [u8] = concat!("vpki/", stringify!($name), "/v1\0").as_bytes();

            fn encode_body(&self, enc: &mut Encoder) {
                $( enc.put(&self.$field); )*
            }

            fn signature(&self) -> &Signature {
                &self.issuer_signature
            }
        }

        impl Wire for $name {
            fn encode_to(&self, enc: &mut Encoder) {
                self.encode_body(enc);
                enc.put(&self.issuer_signature);
            }

            fn decode_from(dec: &mut Decoder<'_>) -> Result<Self> {
                Ok($name {
                    $( $field: dec.get().map_err(|e| in_field(e, stringify!($field)))?, )*
                    issuer_signature: dec.get().map_err(|e| in_field(e, "issuer_signature"))?,
                })
            }
        }
    };
}

/// Binds a vehicle identity to its long-term public key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LongTermCertificate {
    pub subject_id: SubjectId,
    pub public_key: PublicKey,
    pub validity: Interval,
    pub issuer_id: AuthorityId,
    pub issuer_signature: Signature,
}

signed_wire!(LongTermCertificate { subject_id, public_key, validity, issuer_id });

impl LongTermCertificate {
    pub fn issue(
        subject_id: SubjectId,
        public_key: PublicKey,
        validity: Interval,
        issuer_id: AuthorityId,
        issuer_key: &KeyPair,
    ) -> Result<Self> {
        let mut ltc = LongTermCertificate { subject_id, public_key, validity, issuer_id, issuer_signature: Signature(Vec::new()) };
        ltc.issuer_signature = sign_body(&ltc, issuer_key)?;
        Ok(ltc)
    }
}

/// Anonymous, single-use authorization to obtain pseudonyms. Carries no
/// identity; only the issuer's ledger links the serial to a subject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ticket {
    pub serial: Serial,
    /// `H(Id_target || Rnd)` for the authority the ticket is meant for.
    pub target_digest: Digest,
    pub ik: Digest,
    pub validity: Interval,
    pub issuer_id: AuthorityId,
    pub issuer_signature: Signature,
}

signed_wire!(Ticket { serial, target_digest, ik, validity, issuer_id });

impl Ticket {
    pub fn issue(
        serial: Serial,
        target_digest: Digest,
        ik: Digest,
        validity: Interval,
        issuer_id: AuthorityId,
        issuer_key: &KeyPair,
    ) -> Result<Self> {
        let mut t = Ticket { serial, target_digest, ik, validity, issuer_id, issuer_signature: Signature(Vec::new()) };
        t.issuer_signature = sign_body(&t, issuer_key)?;
        Ok(t)
    }
}

/// Short-lived certificate over a per-slot public key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pseudonym {
    pub serial: Serial,
    pub public_key: PublicKey,
    pub ik: Digest,
    pub validity: Interval,
    pub issuer_id: AuthorityId,
    pub issuer_signature: Signature,
}

signed_wire!(Pseudonym { serial, public_key, ik, validity, issuer_id });

impl Pseudonym {
    pub fn issue(
        serial: Serial,
        public_key: PublicKey,
        ik: Digest,
        validity: Interval,
        issuer_id: AuthorityId,
        issuer_key: &KeyPair,
    ) -> Result<Self> {
        let mut p = Pseudonym { serial, public_key, ik, validity, issuer_id, issuer_signature: Signature(Vec::new()) };
        p.issuer_signature = sign_body(&p, issuer_key)?;
        Ok(p)
    }
}

/// Revocation list delta: every serial revoked after `since_sequence`, up to
/// and including `sequence_number`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crl {
    pub issuer_id: AuthorityId,
    pub since_sequence: u64,
    pub sequence_number: u64,
    pub revoked_serials: Vec<Serial>,
    pub issued_at: Epoch,
    pub issuer_signature: Signature,
}

signed_wire!(Crl { issuer_id, since_sequence, sequence_number, revoked_serials, issued_at });

impl Crl {
    pub fn issue(
        issuer_id: AuthorityId,
        since_sequence: u64,
        sequence_number: u64,
        revoked_serials: Vec<Serial>,
        issued_at: Epoch,
        issuer_key: &KeyPair,
    ) -> Result<Self> {
        if since_sequence > sequence_number || (sequence_number - since_sequence) as usize != revoked_serials.len() {
            return Err(Error::InvalidArgument(format!(
                "crl delta ({since_sequence}, {sequence_number}] does not match {} serials",
                revoked_serials.len()
            )));
        }
        let mut c = Crl { issuer_id, since_sequence, sequence_number, revoked_serials, issued_at, issuer_signature: Signature(Vec::new()) };
        c.issuer_signature = sign_body(&c, issuer_key)?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::RandomToken;
    use proptest::prelude::*;

    fn ticket(key: &KeyPair, seed: u8, start: u64, len: u64) -> Ticket {
        Ticket::issue(
            Serial(RandomToken([seed; 16])),
            Digest([seed.wrapping_add(1); 32]),
            Digest([seed.wrapping_add(2); 32]),
            Interval::new(start, start + len).unwrap(),
            AuthorityId::new(format!("ltca-{seed}")),
            key,
        )
        .unwrap()
    }

    #[test]
    fn ticket_roundtrip_canonical() {
        let key = KeyPair::generate().unwrap();
        let t = ticket(&key, 9, 100, 600);
        let bytes = t.to_bytes();
        assert_eq!(bytes, t.clone().to_bytes());
        let back = Ticket::from_bytes(&bytes).unwrap();
        assert_eq!(back, t);
        assert!(back.verify_signature(key.public_key()));
    }

    #[test]
    fn truncated_ticket_names_field() {
        let key = KeyPair::generate().unwrap();
        let bytes = ticket(&key, 1, 0, 10).to_bytes();
        match Ticket::from_bytes(&bytes[..bytes.len() - 3]) {
            Err(Error::Decode { field, .. }) => assert_eq!(field, "issuer_signature"),
            other => panic!("unexpected {other:?}"),
        }
        match Ticket::from_bytes(&bytes[..20]) {
            Err(Error::Decode { field, .. }) => assert_eq!(field, "target_digest"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tags_differ_per_type() {
        assert_ne!(Ticket::TAG, Pseudonym::TAG);
        assert_ne!(Crl::TAG, LongTermCertificate::TAG);
    }

    #[test]
    fn crl_delta_shape_checked() {
        let key = KeyPair::generate().unwrap();
        assert!(Crl::issue(AuthorityId::new("pca"), 2, 3, vec![], 0, &key).is_err());
        let c = Crl::issue(AuthorityId::new("pca"), 2, 3, vec![Serial::random()], 0, &key).unwrap();
        assert!(Crl::from_bytes(&c.to_bytes()).unwrap().verify_signature(key.public_key()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn pseudonym_roundtrip_and_mutations(
            seed in any::<[u8; 16]>(),
            start in 0u64..1_000_000,
            len in 1u64..10_000,
            flip_at in any::<prop::sample::Index>(),
            flip_bit in 0u8..8,
        ) {
            let key = KeyPair::generate().unwrap();
            let p = Pseudonym::issue(
                Serial(RandomToken(seed)),
                PublicKey(seed.to_vec()),
                Digest::of(&seed),
                Interval::new(start, start + len).unwrap(),
                AuthorityId::new("pca.home"),
                &key,
            ).unwrap();
            let bytes = p.to_bytes();
            let back = Pseudonym::from_bytes(&bytes).unwrap();
            prop_assert_eq!(&back, &p);
            prop_assert!(back.verify_signature(key.public_key()));

            let mut mutated = bytes.clone();
            let i = flip_at.index(mutated.len());
            mutated[i] ^= 1 << flip_bit;
            if let Ok(m) = Pseudonym::from_bytes(&mutated) {
                prop_assert!(!m.verify_signature(key.public_key()));
            }
        }
    }
}
