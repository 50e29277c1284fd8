//! Bit strings and fixed-width pointer codes.
//!
//! Every message, block, and key in this crate is a `BitString`. Bits are
//! ordered most-significant-first, so `from_u64(5, 4)` is `0101` and packing
//! into bytes puts the first bit into the top bit of the first byte.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn new() -> Self {
        BitString { bits: Vec::new() }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        BitString { bits }
    }

    /// Big-endian encoding of `value` into exactly `width` bits.
    /// Panics if `value` does not fit.
    pub fn from_u64(value: u64, width: usize) -> Self {
        assert!(width <= 64, "width {width} exceeds u64");
        assert!(
            width == 64 || value < (1u64 << width),
            "value {value} does not fit in {width} bits"
        );
        let bits = (0..width).map(|k| (value >> (width - 1 - k)) & 1 == 1).collect();
        BitString { bits }
    }

    /// Inverse of `from_u64`. Panics on strings longer than 64 bits.
    pub fn as_u64(&self) -> u64 {
        assert!(self.bits.len() <= 64, "bit string too long for u64");
        self.bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, k: usize) -> bool {
        self.bits[k]
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    pub fn extend(&mut self, other: &BitString) {
        self.bits.extend_from_slice(&other.bits);
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut out = self.clone();
        out.extend(other);
        out
    }

    pub fn slice(&self, start: usize, end: usize) -> BitString {
        BitString { bits: self.bits[start..end].to_vec() }
    }

    pub fn truncated(&self, new_len: usize) -> BitString {
        assert!(new_len <= self.bits.len());
        BitString { bits: self.bits[..new_len].to_vec() }
    }

    pub fn last(&self) -> Option<bool> {
        self.bits.last().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }

    /// MSB-first packing; the final partial byte is left-aligned.
    pub fn to_packed_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.bits.len().div_ceil(8)];
        for (k, &b) in self.bits.iter().enumerate() {
            if b {
                out[k / 8] |= 0x80 >> (k % 8);
            }
        }
        out
    }

    pub fn from_packed_bytes(bytes: &[u8], len: usize) -> Self {
        assert!(len <= bytes.len() * 8, "not enough bytes for {len} bits");
        let bits = (0..len).map(|k| bytes[k / 8] & (0x80 >> (k % 8)) != 0).collect();
        BitString { bits }
    }

    /// GF(2) inner product with an equal-length string.
    pub fn dot(&self, other: &BitString) -> bool {
        assert_eq!(self.len(), other.len(), "dot over unequal lengths");
        self.bits.iter().zip(&other.bits).fold(false, |acc, (&a, &b)| acc ^ (a && b))
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        let mut bits = Vec::with_capacity(text.len());
        for ch in text.chars() {
            match ch {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => return Err(D::Error::custom(format!("invalid bit char {ch:?}"))),
            }
        }
        Ok(BitString { bits })
    }
}

/// Width in bits of a pointer into `[n]`: ceil(log2 n), and 0 when n = 1.
pub fn pointer_width(n: usize) -> usize {
    assert!(n >= 1, "pointer domain must be nonempty");
    (usize::BITS - (n - 1).leading_zeros()) as usize
}

/// Fixed-width big-endian code for pointers into `[n] = {0, .., n-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PointerCode {
    n: usize,
    width: usize,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CodeError {
    #[error("pointer {value} out of range for domain size {n}")]
    OutOfRange { value: usize, n: usize },
    #[error("expected {expected} bits, got {got}")]
    WrongLength { expected: usize, got: usize },
}

impl PointerCode {
    pub fn new(n: usize) -> Self {
        PointerCode { n, width: pointer_width(n) }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn encode(&self, value: usize) -> Result<BitString, CodeError> {
        if value >= self.n {
            return Err(CodeError::OutOfRange { value, n: self.n });
        }
        Ok(BitString::from_u64(value as u64, self.width))
    }

    pub fn decode(&self, bits: &BitString) -> Result<usize, CodeError> {
        if bits.len() != self.width {
            return Err(CodeError::WrongLength { expected: self.width, got: bits.len() });
        }
        let value = bits.as_u64() as usize;
        if value >= self.n {
            return Err(CodeError::OutOfRange { value, n: self.n });
        }
        Ok(value)
    }
}
