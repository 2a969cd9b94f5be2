//! Canonical binary encoding.
//!
//! Fields are written in declaration order. Integers are big-endian,
//! variable-length byte strings and sequences carry a `u32` length prefix,
//! optional values a one-byte tag. There is exactly one encoding per value,
//! so signatures over encodings are stable across a round trip.

use crate::crypto::{Digest, PublicKey, RandomToken, Signature, DIGEST_LEN, TOKEN_LEN};
use crate::error::{Error, Result};

#[derive(Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn raw(&mut self, bytes: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn bool(&mut self, v: bool) -> &mut Self {
        self.u8(v as u8)
    }

    pub fn u16(&mut self, v: u16) -> &mut Self {
        self.raw(&v.to_be_bytes())
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.raw(&v.to_be_bytes())
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.raw(&v.to_be_bytes())
    }

    pub fn bytes(&mut self, v: &[u8]) -> &mut Self {
        self.u32(v.len() as u32);
        self.raw(v)
    }

    pub fn str(&mut self, v: &str) -> &mut Self {
        self.bytes(v.as_bytes())
    }

    pub fn put<T: Wire>(&mut self, v: &T) -> &mut Self {
        v.encode_to(self);
        self
    }

    pub fn seq<T: Wire>(&mut self, items: &[T]) -> &mut Self {
        self.u32(items.len() as u32);
        for item in items {
            item.encode_to(self);
        }
        self
    }

    pub fn opt<T: Wire>(&mut self, v: Option<&T>) -> &mut Self {
        match v {
            None => self.u8(0),
            Some(v) => {
                self.u8(1);
                v.encode_to(self);
                self
            }
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Decoder { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize, field: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::decode(field, format!("needs {n} bytes, {} left", self.remaining())));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self, field: &str) -> Result<u8> {
        Ok(self.take(1, field)?[0])
    }

    pub fn bool(&mut self, field: &str) -> Result<bool> {
        match self.u8(field)? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(Error::decode(field, format!("invalid boolean {v}"))),
        }
    }

    pub fn u16(&mut self, field: &str) -> Result<u16> {
        Ok(u16::from_be_bytes(self.take(2, field)?.try_into().unwrap()))
    }

    pub fn u32(&mut self, field: &str) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4, field)?.try_into().unwrap()))
    }

    pub fn u64(&mut self, field: &str) -> Result<u64> {
        Ok(u64::from_be_bytes(self.take(8, field)?.try_into().unwrap()))
    }

    pub fn bytes(&mut self, field: &str) -> Result<Vec<u8>> {
        let len = self.u32(field)? as usize;
        Ok(self.take(len, field)?.to_vec())
    }

    pub fn str(&mut self, field: &str) -> Result<String> {
        String::from_utf8(self.bytes(field)?).map_err(|_| Error::decode(field, "not utf-8"))
    }

    pub fn get<T: Wire>(&mut self) -> Result<T> {
        T::decode_from(self)
    }

    pub fn seq<T: Wire>(&mut self, field: &str) -> Result<Vec<T>> {
        let n = self.u32(field)? as usize;
        // Every element takes at least one byte; reject absurd counts before allocating.
        if n > self.remaining() {
            return Err(Error::decode(field, format!("sequence of {n} exceeds buffer")));
        }
        (0..n).map(|_| T::decode_from(self)).collect()
    }

    pub fn opt<T: Wire>(&mut self, field: &str) -> Result<Option<T>> {
        match self.u8(field)? {
            0 => Ok(None),
            1 => Ok(Some(T::decode_from(self)?)),
            v => Err(Error::decode(field, format!("invalid option tag {v}"))),
        }
    }

    pub fn finish(self, what: &str) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::decode(what, format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

/// Re-labels a decode error with the enclosing field name, building a dotted
/// path for nested values.
pub fn in_field(err: Error, name: &str) -> Error {
    const LEAVES: &[&str] = &[
        "u8", "u16", "u32", "u64", "bool", "string", "digest", "token", "public_key", "signature", "sequence", "option",
    ];
    match err {
        Error::Decode { field, reason } if LEAVES.contains(&field.as_str()) => Error::decode(name, reason),
        Error::Decode { field, reason } => Error::decode(format!("{name}.{field}"), reason),
        other => other,
    }
}

/// Implements [`Wire`] for a struct whose fields all implement it, encoded in
/// the listed order.
#[macro_export]
macro_rules! wire_struct {
    ($name:ident { $($field:ident),* $(,)? }) => {
        impl $crate::wire::Wire for $name {
            fn encode_to(&self, enc: &mut $crate::wire::Encoder) {
                $( enc.put(&self.$field); )*
            }
            fn decode_from(dec: &mut $crate::wire::Decoder<'_>) -> $crate::error::Result<Self> {
                Ok($name {
                    $( $field: dec.get().map_err(|e| $crate::wire::in_field(e, stringify!($field)))?, )*
                })
            }
        }
    };
}

pub trait Wire: Sized {
    fn encode_to(&self, enc: &mut Encoder);
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self>;

    fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        self.encode_to(&mut enc);
        enc.finish()
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes);
        let v = Self::decode_from(&mut dec)?;
        dec.finish(std::any::type_name::<Self>().rsplit("::").next().unwrap_or("value"))?;
        Ok(v)
    }
}

impl Wire for Digest {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.raw(&self.0);
    }
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self> {
        Ok(Digest(dec.take(DIGEST_LEN, "digest")?.try_into().unwrap()))
    }
}

impl Wire for RandomToken {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.raw(&self.0);
    }
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self> {
        Ok(RandomToken(dec.take(TOKEN_LEN, "token")?.try_into().unwrap()))
    }
}

impl Wire for PublicKey {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.bytes(&self.0);
    }
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self> {
        Ok(PublicKey(dec.bytes("public_key")?))
    }
}

impl Wire for Signature {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.bytes(&self.0);
    }
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self> {
        Ok(Signature(dec.bytes("signature")?))
    }
}

impl Wire for u64 {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.u64(*self);
    }
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self> {
        dec.u64("u64")
    }
}

impl Wire for u16 {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.u16(*self);
    }
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self> {
        dec.u16("u16")
    }
}

impl Wire for u8 {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.u8(*self);
    }
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self> {
        dec.u8("u8")
    }
}

impl Wire for bool {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.bool(*self);
    }
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self> {
        dec.bool("bool")
    }
}

impl<T: Wire> Wire for Option<T> {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.opt(self.as_ref());
    }
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self> {
        dec.opt("option")
    }
}

impl Wire for String {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.str(self);
    }
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self> {
        dec.str("string")
    }
}

impl<T: Wire> Wire for Vec<T> {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.seq(self);
    }
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self> {
        dec.seq("sequence")
    }
}
