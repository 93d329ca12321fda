//! Fixed-width two-state bit-vectors, up to 64 bits wide.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Widest bit-vector the simulator handles.
pub const MAX_WIDTH: u32 = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BitVecError {
    #[error("bit-vector literal `{0}` must start with 0b and contain only binary digits")]
    BadLiteral(String),
    #[error("bit-vector width {0} is outside 1..={MAX_WIDTH}")]
    BadWidth(usize),
}

/// A two-state bit-vector. Bits above `width` are always zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVec {
    width: u32,
    bits: u64,
}

#[inline]
pub fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

impl BitVec {
    pub fn new(width: u32, bits: u64) -> Self {
        assert!(
            (1..=MAX_WIDTH).contains(&width),
            "bit-vector width {width} out of range"
        );
        BitVec {
            width,
            bits: bits & mask(width),
        }
    }

    pub fn zero(width: u32) -> Self {
        Self::new(width, 0)
    }

    pub fn ones(width: u32) -> Self {
        Self::new(width, u64::MAX)
    }

    pub fn bit_value(b: bool) -> Self {
        Self::new(1, b as u64)
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn bits(&self) -> u64 {
        self.bits
    }

    #[inline]
    pub fn bit(&self, i: u32) -> bool {
        debug_assert!(i < self.width);
        (self.bits >> i) & 1 == 1
    }

    pub fn is_zero(&self) -> bool {
        self.bits == 0
    }

    pub fn is_ones(&self) -> bool {
        self.bits == mask(self.width)
    }

    /// Value interpreted as two's complement.
    pub fn signed(&self) -> i64 {
        let shift = 64 - self.width;
        ((self.bits << shift) as i64) >> shift
    }

    /// Bits `lo..=hi` as a new vector.
    pub fn slice(&self, hi: u32, lo: u32) -> Self {
        debug_assert!(lo <= hi && hi < self.width);
        Self::new(hi - lo + 1, self.bits >> lo)
    }

    /// Concatenate with `self` as the high part.
    pub fn concat(&self, low: &BitVec) -> Self {
        Self::new(self.width + low.width, (self.bits << low.width) | low.bits)
    }

    pub fn zext(&self, width: u32) -> Self {
        Self::new(width, self.bits)
    }

    pub fn sext(&self, width: u32) -> Self {
        Self::new(width, self.signed() as u64)
    }

    /// Literal form: `0b` followed by exactly `width` digits, MSB first.
    pub fn to_literal(&self) -> String {
        let mut s = String::with_capacity(self.width as usize + 2);
        s.push_str("0b");
        for i in (0..self.width).rev() {
            s.push(if self.bit(i) { '1' } else { '0' });
        }
        s
    }

    pub fn parse_literal(text: &str) -> Result<Self, BitVecError> {
        let digits = text
            .strip_prefix("0b")
            .ok_or_else(|| BitVecError::BadLiteral(text.to_string()))?;
        if digits.is_empty() || !digits.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(BitVecError::BadLiteral(text.to_string()));
        }
        if digits.len() > MAX_WIDTH as usize {
            return Err(BitVecError::BadWidth(digits.len()));
        }
        let bits = digits
            .bytes()
            .fold(0u64, |acc, b| (acc << 1) | (b - b'0') as u64);
        Ok(Self::new(digits.len() as u32, bits))
    }
}

impl FromStr for BitVec {
    type Err = BitVecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse_literal(s)
    }
}

impl fmt::Display for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_literal())
    }
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_literal())
    }
}
