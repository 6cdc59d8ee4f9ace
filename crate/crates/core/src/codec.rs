//! Canonical binary encoding.
//!
//! Fields are written in declaration order. Integers are big-endian and fixed
//! width, variable-length byte strings carry a `u32` length prefix, and enum
//! variants are a single tag byte. Decoding rejects trailing bytes so that
//! every value has exactly one encoding. See `docs/encoding.md` for layouts.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("unexpected end of input while reading {0}")]
    UnexpectedEnd(&'static str),
    #[error("{0} trailing bytes after value")]
    TrailingBytes(usize),
    #[error("invalid {what} tag {tag}")]
    InvalidTag { what: &'static str, tag: u8 },
    #[error("length {0} exceeds limit")]
    LengthOverflow(u64),
    #[error("invalid utf-8 string")]
    InvalidUtf8,
    #[error("invalid value: {0}")]
    Invalid(&'static str),
}

/// Upper bound on any single length prefix; guards allocation on hostile input.
pub const MAX_FIELD_LEN: u32 = 64 * 1024 * 1024;

#[derive(Debug, Default, Clone)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn put_u128(&mut self, v: u128) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn put_fixed(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn put_bytes(&mut self, bytes: &[u8]) {
        let len = u32::try_from(bytes.len()).expect("field longer than u32::MAX");
        self.put_u32(len);
        self.buf.extend_from_slice(bytes);
    }

    pub fn put_str(&mut self, s: &str) {
        self.put_bytes(s.as_bytes());
    }

    pub fn put<T: Encode + ?Sized>(&mut self, v: &T) {
        v.encode(self);
    }

    pub fn put_seq<T: Encode>(&mut self, items: &[T]) {
        let len = u32::try_from(items.len()).expect("sequence longer than u32::MAX");
        self.put_u32(len);
        for item in items {
            item.encode(self);
        }
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug)]
pub struct Decoder<'a> {
    input: &'a [u8],
}

impl<'a> Decoder<'a> {
    pub fn new(input: &'a [u8]) -> Self {
        Self { input }
    }

    pub fn remaining(&self) -> usize {
        self.input.len()
    }

    pub fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], DecodeError> {
        if self.input.len() < n {
            return Err(DecodeError::UnexpectedEnd(what));
        }
        let (head, tail) = self.input.split_at(n);
        self.input = tail;
        Ok(head)
    }

    pub fn get_array<const N: usize>(
        &mut self,
        what: &'static str,
    ) -> Result<[u8; N], DecodeError> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.take(N, what)?);
        Ok(out)
    }

    pub fn get_u8(&mut self, what: &'static str) -> Result<u8, DecodeError> {
        Ok(self.take(1, what)?[0])
    }

    pub fn get_u32(&mut self, what: &'static str) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.get_array(what)?))
    }

    pub fn get_u64(&mut self, what: &'static str) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.get_array(what)?))
    }

    pub fn get_u128(&mut self, what: &'static str) -> Result<u128, DecodeError> {
        Ok(u128::from_be_bytes(self.get_array(what)?))
    }

    fn get_len(&mut self, what: &'static str) -> Result<usize, DecodeError> {
        let len = self.get_u32(what)?;
        if len > MAX_FIELD_LEN {
            return Err(DecodeError::LengthOverflow(len as u64));
        }
        Ok(len as usize)
    }

    pub fn get_bytes(&mut self, what: &'static str) -> Result<Vec<u8>, DecodeError> {
        let len = self.get_len(what)?;
        Ok(self.take(len, what)?.to_vec())
    }

    pub fn get_string(&mut self, what: &'static str) -> Result<String, DecodeError> {
        String::from_utf8(self.get_bytes(what)?).map_err(|_| DecodeError::InvalidUtf8)
    }

    pub fn get<T: Decode>(&mut self) -> Result<T, DecodeError> {
        T::decode(self)
    }

    pub fn get_seq<T: Decode>(&mut self, what: &'static str) -> Result<Vec<T>, DecodeError> {
        let len = self.get_len(what)?;
        // Every element occupies at least one byte.
        if len > self.remaining() {
            return Err(DecodeError::UnexpectedEnd(what));
        }
        (0..len).map(|_| T::decode(self)).collect()
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        match self.input.len() {
            0 => Ok(()),
            n => Err(DecodeError::TrailingBytes(n)),
        }
    }
}

pub trait Encode {
    fn encode(&self, enc: &mut Encoder);

    fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        self.encode(&mut enc);
        enc.into_bytes()
    }
}

pub trait Decode: Sized {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError>;

    /// Decodes a complete value, rejecting trailing input.
    fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut dec = Decoder::new(bytes);
        let value = Self::decode(&mut dec)?;
        dec.finish()?;
        Ok(value)
    }
}
