//! Growable bit strings packed into 64-bit words.
//!
//! Bit order is big-endian throughout: bit 0 is the most significant bit of
//! word 0, and `as_bytes_be` emits bit 0 as the MSB of the first byte. Ordering
//! compares bitwise lexicographically, so a proper prefix sorts before its
//! extensions.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Bits {
    words: Vec<u64>,
    len: usize,
}

impl Bits {
    pub fn new() -> Self {
        Bits { words: Vec::new(), len: 0 }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {} out of range {}", i, self.len);
        self.words[i / 64] >> (63 - (i % 64)) & 1 == 1
    }

    pub fn push(&mut self, bit: bool) {
        if self.len % 64 == 0 {
            self.words.push(0);
        }
        if bit {
            let w = self.words.last_mut().unwrap();
            *w |= 1u64 << (63 - (self.len % 64));
        }
        self.len += 1;
    }

    pub fn extend(&mut self, other: &Bits) {
        for b in other.iter() {
            self.push(b);
        }
    }

    /// Drops all bits at index `new_len` and beyond.
    pub fn truncate(&mut self, new_len: usize) {
        assert!(new_len <= self.len);
        self.len = new_len;
        let keep_words = new_len.div_ceil(64);
        self.words.truncate(keep_words);
        // Clear the tail of the last word so equality stays structural.
        if let Some(w) = self.words.last_mut() {
            let used = new_len - (keep_words - 1) * 64;
            if used < 64 {
                *w &= !0u64 << (64 - used);
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut b = Bits::new();
        for &x in bits {
            b.push(x);
        }
        b
    }

    /// Parses a string of ASCII `0` and `1`. Any other character is rejected.
    pub fn parse(s: &str) -> Result<Self, BitParseError> {
        let mut b = Bits::new();
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => b.push(false),
                '1' => b.push(true),
                _ => return Err(BitParseError { position: i, found: c }),
            }
        }
        Ok(b)
    }

    /// True if `self` is a prefix of `other` (equality counts).
    pub fn is_prefix_of(&self, other: &Bits) -> bool {
        if self.len > other.len {
            return false;
        }
        self.iter().zip(other.iter()).all(|(a, b)| a == b)
    }

    /// Packs into bytes, big-endian bit order, zero-padded in the final byte.
    pub fn as_bytes_be(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len.div_ceil(8));
        for chunk_start in (0..self.len).step_by(8) {
            let mut byte = 0u8;
            for off in 0..8 {
                let i = chunk_start + off;
                if i < self.len && self.get(i) {
                    byte |= 1 << (7 - off);
                }
            }
            out.push(byte);
        }
        out
    }

    /// Inverse of `as_bytes_be` given the original bit length.
    pub fn from_bytes_be(bytes: &[u8], len: usize) -> Result<Self, BitUnpackError> {
        if bytes.len() != len.div_ceil(8) {
            return Err(BitUnpackError { bytes: bytes.len(), bits: len });
        }
        let mut b = Bits::new();
        for i in 0..len {
            b.push(bytes[i / 8] >> (7 - i % 8) & 1 == 1);
        }
        Ok(b)
    }
}

impl PartialOrd for Bits {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Bits {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.iter().zip(other.iter()) {
            match a.cmp(&b) {
                Ordering::Equal => {}
                o => return o,
            }
        }
        self.len.cmp(&other.len)
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits({})", self)
    }
}

impl From<&str> for Bits {
    /// Panics on characters other than `0`/`1`; intended for literals in tests.
    fn from(s: &str) -> Self {
        Bits::parse(s).expect("bit literal")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitParseError {
    pub position: usize,
    pub found: char,
}

impl fmt::Display for BitParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid bit character {:?} at position {}", self.found, self.position)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitUnpackError {
    pub bytes: usize,
    pub bits: usize,
}

impl fmt::Display for BitUnpackError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} bytes cannot hold exactly {} bits", self.bytes, self.bits)
    }
}

/// Renders a bit string for the machine file format, `-` when empty.
pub fn display_or_dash(b: &Bits) -> String {
    use alloc::string::ToString;
    if b.is_empty() {
        String::from("-")
    } else {
        b.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_get_roundtrip_across_word_boundary() {
        let mut b = Bits::new();
        let pattern: Vec<bool> = (0..130).map(|i| i % 3 == 0).collect();
        for &x in &pattern {
            b.push(x);
        }
        assert_eq!(b.len(), 130);
        for (i, &x) in pattern.iter().enumerate() {
            assert_eq!(b.get(i), x, "bit {}", i);
        }
    }

    #[test]
    fn truncate_clears_tail_for_equality() {
        let mut a = Bits::from("1111");
        a.truncate(2);
        let b = Bits::from("11");
        assert_eq!(a, b);
        a.push(false);
        assert_eq!(a, Bits::from("110"));
    }

    #[test]
    fn ordering_is_lexicographic_with_prefix_first() {
        let e = Bits::new();
        let zero = Bits::from("0");
        let zero_one = Bits::from("01");
        let one = Bits::from("1");
        assert!(e < zero);
        assert!(zero < zero_one);
        assert!(zero_one < one);
    }

    #[test]
    fn bytes_be_packing() {
        let b = Bits::from("101000011");
        assert_eq!(b.as_bytes_be(), vec![0b1010_0001, 0b1000_0000]);
        assert_eq!(Bits::from_bytes_be(&b.as_bytes_be(), 9).unwrap(), b);
        assert!(Bits::from_bytes_be(&[0, 0, 0], 9).is_err());
    }

    #[test]
    fn parse_rejects_garbage() {
        let err = Bits::parse("01x").unwrap_err();
        assert_eq!(err.position, 2);
    }

    #[test]
    fn prefix_check() {
        assert!(Bits::from("10").is_prefix_of(&Bits::from("101")));
        assert!(!Bits::from("11").is_prefix_of(&Bits::from("101")));
        assert!(Bits::new().is_prefix_of(&Bits::from("0")));
    }
}
