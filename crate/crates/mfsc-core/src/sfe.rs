//! Shannon-Fano-Elias block coding over exact cylinder measures.
//!
//! A word `w` of block length `k` with probability `p(w)` gets the first
//! `1 + ceil(-log2 p(w))` binary digits of `F(w) + p(w)/2`, where `F` sums the
//! masses of all lexicographically smaller blocks. Truncating that midpoint
//! keeps the codeword inside `[F(w), F(w) + p(w))`, so distinct blocks get
//! non-nested cylinders and the code is prefix-free without ever listing it.
//!
//! Decoding descends the symbol tree, consuming stream bits lazily until the
//! dyadic interval of the bits read so far fits inside a single child
//! cylinder. The located word is re-encoded and compared bit for bit against
//! the stream; any disagreement is reported as a mismatch rather than patched
//! over, which is what makes corrupted streams detectable.

use alloc::vec::Vec;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::bits::Bits;
use crate::machine::{RationalDist, Sym};
use crate::numeric::{floor_log2, int_rat, prefix_sums};

use core::fmt;

/// Probability mass assigned to cylinder sets of a fixed block length.
///
/// `cylinder(prefix)` is the total mass of words in `Sigma^block_len` that
/// start with `prefix`; `cylinder(&[])` must be 1 and masses of the children
/// of any prefix must sum to the mass of the prefix.
pub trait CylinderMeasure {
    fn sigma(&self) -> usize;
    fn block_len(&self) -> usize;
    fn cylinder(&self, prefix: &[Sym]) -> BigRational;
}

#[derive(Debug, Clone, PartialEq)]
pub enum SfeError {
    /// Word has zero probability, so no codeword exists for it.
    ZeroMass,
    /// Word length does not equal the measure's block length.
    WordLength { expected: usize, got: usize },
    /// Symbol index at or beyond the alphabet size.
    SymbolRange { symbol: u8, sigma: usize },
    /// Stream ended before the decoder could pin down a block.
    OutOfBits,
    /// Bits at `offset` are not a codeword of this measure.
    NoMatch { offset: usize },
    /// Enumeration would exceed the configured state budget.
    Budget { needed: u64, limit: u64 },
}

impl fmt::Display for SfeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SfeError::ZeroMass => write!(f, "word has zero probability"),
            SfeError::WordLength { expected, got } => {
                write!(f, "word length {got}, measure expects {expected}")
            }
            SfeError::SymbolRange { symbol, sigma } => {
                write!(f, "symbol {symbol} outside alphabet of size {sigma}")
            }
            SfeError::OutOfBits => write!(f, "bit stream ended mid-codeword"),
            SfeError::NoMatch { offset } => {
                write!(f, "bits at offset {offset} are not a codeword")
            }
            SfeError::Budget { needed, limit } => {
                write!(f, "enumeration needs {needed} words, budget is {limit}")
            }
        }
    }
}

fn check_word(sigma: usize, k: usize, w: &[Sym]) -> Result<(), SfeError> {
    if w.len() != k {
        return Err(SfeError::WordLength { expected: k, got: w.len() });
    }
    for s in w {
        if (s.0 as usize) >= sigma {
            return Err(SfeError::SymbolRange { symbol: s.0, sigma });
        }
    }
    Ok(())
}

/// Measure given by an explicit probability table over `Sigma^k` in
/// lexicographic order (first symbol most significant).
pub struct ExplicitMeasure {
    sigma: usize,
    k: usize,
    // cumulative[r] = mass of the first r words; length sigma^k + 1
    cumulative: Vec<BigRational>,
}

impl ExplicitMeasure {
    pub fn new(sigma: usize, k: usize, probs: Vec<BigRational>) -> Result<Self, SfeError> {
        let count = (sigma as u64).checked_pow(k as u32).filter(|&c| c <= 1 << 22);
        let count = match count {
            Some(c) => c as usize,
            None => return Err(SfeError::Budget { needed: u64::MAX, limit: 1 << 22 }),
        };
        assert_eq!(probs.len(), count, "probability table size");
        assert!(probs.iter().all(|p| !p.is_negative()), "negative probability");
        let cumulative = prefix_sums(&probs);
        assert!(cumulative[count].is_one(), "probabilities must sum to 1");
        Ok(ExplicitMeasure { sigma, k, cumulative })
    }
}

impl CylinderMeasure for ExplicitMeasure {
    fn sigma(&self) -> usize {
        self.sigma
    }

    fn block_len(&self) -> usize {
        self.k
    }

    fn cylinder(&self, prefix: &[Sym]) -> BigRational {
        assert!(prefix.len() <= self.k);
        let mut rank = 0usize;
        for s in prefix {
            rank = rank * self.sigma + s.0 as usize;
        }
        let span = self.sigma.pow((self.k - prefix.len()) as u32);
        &self.cumulative[(rank + 1) * span] - &self.cumulative[rank * span]
    }
}

/// Independent draws from one distribution, as a block measure.
pub struct ProductMeasure {
    dist: RationalDist,
    k: usize,
}

impl ProductMeasure {
    pub fn new(dist: RationalDist, k: usize) -> Self {
        ProductMeasure { dist, k }
    }
}

impl CylinderMeasure for ProductMeasure {
    fn sigma(&self) -> usize {
        self.dist.probs().len()
    }

    fn block_len(&self) -> usize {
        self.k
    }

    fn cylinder(&self, prefix: &[Sym]) -> BigRational {
        assert!(prefix.len() <= self.k);
        let mut mass = BigRational::one();
        for s in prefix {
            mass *= &self.dist.probs()[s.0 as usize];
        }
        mass
    }
}

/// Codeword length for a block of probability `p`: `1 + ceil(-log2 p)`.
pub fn code_len(p: &BigRational) -> usize {
    assert!(p.is_positive() && *p <= BigRational::one());
    (1 - floor_log2(p)) as usize
}

/// Lower endpoint `F(w)` and mass `p(w)` of the word's coding interval.
pub fn interval_for<M: CylinderMeasure + ?Sized>(
    m: &M,
    w: &[Sym],
) -> Result<(BigRational, BigRational), SfeError> {
    check_word(m.sigma(), m.block_len(), w)?;
    let mut low = BigRational::zero();
    let mut prefix: Vec<Sym> = Vec::with_capacity(w.len());
    for &a in w {
        for b in 0..a.0 {
            prefix.push(Sym(b));
            low += m.cylinder(&prefix);
            prefix.pop();
        }
        prefix.push(a);
    }
    let mass = m.cylinder(&prefix);
    if mass.is_zero() {
        return Err(SfeError::ZeroMass);
    }
    Ok((low, mass))
}

/// Codeword for one block: binary digits of `F(w) + p(w)/2`.
pub fn sfe_encode<M: CylinderMeasure + ?Sized>(m: &M, w: &[Sym]) -> Result<Bits, SfeError> {
    let (low, mass) = interval_for(m, w)?;
    let len = code_len(&mass);
    let mut x = low + mass / int_rat(2);
    let one = BigRational::one();
    let mut out = Bits::new();
    for _ in 0..len {
        x *= int_rat(2);
        let bit = x >= one;
        if bit {
            x -= &one;
        }
        out.push(bit);
    }
    Ok(out)
}

/// Reads one codeword starting at `offset`; returns the block and the number
/// of bits consumed.
///
/// Any stream extending a valid codeword lands inside the word's coding
/// interval, so the descent needs at most the codeword's own length in bits
/// at every level; afterwards the exact re-encode distinguishes the real
/// codeword from other bit strings that happen to start in the interval.
pub fn sfe_decode<M: CylinderMeasure + ?Sized>(
    m: &M,
    bits: &Bits,
    offset: usize,
) -> Result<(Vec<Sym>, usize), SfeError> {
    let sigma = m.sigma();
    let k = m.block_len();
    let two = int_rat(2);

    // dyadic interval [value, value + scale) of the bits consumed so far
    let mut value = BigRational::zero();
    let mut scale = BigRational::one();
    let mut consumed = 0usize;

    let mut word: Vec<Sym> = Vec::with_capacity(k);
    let mut low = BigRational::zero();
    let mut mass = BigRational::one();

    for _ in 0..k {
        let mut child_mass: Vec<BigRational> = Vec::with_capacity(sigma);
        for a in 0..sigma {
            word.push(Sym(a as u8));
            child_mass.push(m.cylinder(&word));
            word.pop();
        }
        let bounds = prefix_sums(&child_mass);
        loop {
            let mut found = None;
            for a in 0..sigma {
                let lo = &low + &bounds[a];
                let hi = &low + &bounds[a + 1];
                if lo <= value && &value + &scale <= hi {
                    found = Some((a, lo));
                    break;
                }
            }
            if let Some((a, lo)) = found {
                word.push(Sym(a as u8));
                mass = child_mass[a].clone();
                low = lo;
                break;
            }
            if offset + consumed >= bits.len() {
                return Err(SfeError::OutOfBits);
            }
            scale /= &two;
            if bits.get(offset + consumed) {
                value += &scale;
            }
            consumed += 1;
        }
    }

    debug_assert!(mass.is_positive());
    let len = code_len(&mass);
    debug_assert!(consumed <= len, "descent consumed more than one codeword");
    if offset + len > bits.len() {
        return Err(SfeError::OutOfBits);
    }
    let expect = sfe_encode(m, &word)?;
    for i in 0..len {
        if expect.get(i) != bits.get(offset + i) {
            return Err(SfeError::NoMatch { offset });
        }
    }
    Ok((word, len))
}

/// Every positive-mass block with its codeword, in lexicographic order.
pub fn codebook<M: CylinderMeasure + ?Sized>(m: &M) -> Result<Vec<(Vec<Sym>, Bits)>, SfeError> {
    let sigma = m.sigma();
    let k = m.block_len();
    let total = (sigma as u64).checked_pow(k as u32);
    match total {
        Some(t) if t <= 1 << 22 => {}
        _ => {
            return Err(SfeError::Budget { needed: total.unwrap_or(u64::MAX), limit: 1 << 22 })
        }
    }
    let mut out = Vec::new();
    let mut w = alloc::vec![Sym(0); k];
    loop {
        match sfe_encode(m, &w) {
            Ok(code) => out.push((w.clone(), code)),
            Err(SfeError::ZeroMass) => {}
            Err(e) => return Err(e),
        }
        // radix odometer, least significant at the right
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if (w[i].0 as usize) + 1 < sigma {
                w[i] = Sym(w[i].0 + 1);
                break;
            }
            w[i] = Sym(0);
        }
    }
}

/// Bits of the fixed-width radix symbol code: enough to index the alphabet.
pub fn radix_bits(sigma: usize) -> usize {
    assert!(sigma >= 2);
    (usize::BITS - (sigma - 1).leading_zeros()) as usize
}

/// Appends the symbol's index, most significant bit first.
pub fn radix_append(out: &mut Bits, a: Sym, sigma: usize) {
    let width = radix_bits(sigma);
    for i in (0..width).rev() {
        out.push((a.0 as usize >> i) & 1 == 1);
    }
}

/// Reads one fixed-width symbol at `offset`; returns it with the bit count.
pub fn radix_decode(bits: &Bits, offset: usize, sigma: usize) -> Result<(Sym, usize), SfeError> {
    let width = radix_bits(sigma);
    if offset + width > bits.len() {
        return Err(SfeError::OutOfBits);
    }
    let mut v = 0usize;
    for i in 0..width {
        v = (v << 1) | bits.get(offset + i) as usize;
    }
    if v >= sigma {
        return Err(SfeError::SymbolRange { symbol: v as u8, sigma });
    }
    Ok((Sym(v as u8), width))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rat;
    use alloc::vec;

    fn syms(xs: &[u8]) -> Vec<Sym> {
        xs.iter().map(|&x| Sym(x)).collect()
    }

    #[test]
    fn uniform_single_symbol_codewords() {
        let m = ProductMeasure::new(RationalDist::uniform(2), 1);
        assert_eq!(sfe_encode(&m, &syms(&[0])).unwrap(), Bits::from("01"));
        assert_eq!(sfe_encode(&m, &syms(&[1])).unwrap(), Bits::from("11"));

        let (w, used) = sfe_decode(&m, &Bits::from("01"), 0).unwrap();
        assert_eq!((w, used), (syms(&[0]), 2));
        let (w, used) = sfe_decode(&m, &Bits::from("1101"), 0).unwrap();
        assert_eq!((w, used), (syms(&[1]), 2));
    }

    #[test]
    fn decode_rejects_non_codeword() {
        // "10" starts in the cylinder of word 1 but is not its codeword.
        let m = ProductMeasure::new(RationalDist::uniform(2), 1);
        assert_eq!(sfe_decode(&m, &Bits::from("10"), 0), Err(SfeError::NoMatch { offset: 0 }));
        assert_eq!(sfe_decode(&m, &Bits::from("1"), 0), Err(SfeError::OutOfBits));
    }

    #[test]
    fn skewed_three_symbol_lengths_and_codewords() {
        let m = ExplicitMeasure::new(3, 1, vec![rat(1, 2), rat(1, 4), rat(1, 4)]).unwrap();
        let book = codebook(&m).unwrap();
        let codes: Vec<&Bits> = book.iter().map(|(_, c)| c).collect();
        assert_eq!(codes[0], &Bits::from("01"));
        assert_eq!(codes[1], &Bits::from("101"));
        assert_eq!(codes[2], &Bits::from("111"));
    }

    #[test]
    fn non_dyadic_masses_roundtrip() {
        let m = ExplicitMeasure::new(2, 1, vec![rat(2, 3), rat(1, 3)]).unwrap();
        let c0 = sfe_encode(&m, &syms(&[0])).unwrap();
        let c1 = sfe_encode(&m, &syms(&[1])).unwrap();
        assert_eq!(c0, Bits::from("01"));
        assert_eq!(c1, Bits::from("110"));
        assert_eq!(sfe_decode(&m, &c0, 0).unwrap(), (syms(&[0]), 2));
        assert_eq!(sfe_decode(&m, &c1, 0).unwrap(), (syms(&[1]), 3));
    }

    #[test]
    fn codebook_is_prefix_free_with_kraft_at_most_one() {
        let dist = RationalDist::new(vec![rat(1, 2), rat(1, 3), rat(1, 6)]).unwrap();
        let m = ProductMeasure::new(dist, 2);
        let book = codebook(&m).unwrap();
        assert_eq!(book.len(), 9);
        let mut kraft = BigRational::zero();
        for (i, (_, ci)) in book.iter().enumerate() {
            kraft += crate::numeric::pow2(-(ci.len() as i64));
            for (j, (_, cj)) in book.iter().enumerate() {
                if i != j {
                    assert!(!ci.is_prefix_of(cj), "codeword {i} prefixes {j}");
                }
            }
        }
        assert!(kraft <= BigRational::one());
    }

    #[test]
    fn decode_walks_a_concatenated_stream() {
        let dist = RationalDist::new(vec![rat(1, 2), rat(1, 3), rat(1, 6)]).unwrap();
        let m = ProductMeasure::new(dist, 2);
        let blocks = [syms(&[1, 0]), syms(&[2, 2]), syms(&[0, 0])];
        let mut stream = Bits::new();
        for b in &blocks {
            stream.extend(&sfe_encode(&m, b).unwrap());
        }
        let mut at = 0;
        for b in &blocks {
            let (w, used) = sfe_decode(&m, &stream, at).unwrap();
            assert_eq!(&w, b);
            at += used;
        }
        assert_eq!(at, stream.len());
    }

    #[test]
    fn zero_mass_words_are_rejected_and_skipped() {
        let dist = RationalDist::new_unchecked(vec![rat(1, 1), rat(0, 1)]);
        let m = ProductMeasure::new(dist, 2);
        assert_eq!(sfe_encode(&m, &syms(&[0, 1])), Err(SfeError::ZeroMass));
        // the sure word needs no descent bits but still carries one
        assert_eq!(sfe_encode(&m, &syms(&[0, 0])).unwrap(), Bits::from("1"));
        let book = codebook(&m).unwrap();
        assert_eq!(book.len(), 1);
        let (w, used) = sfe_decode(&m, &Bits::from("1"), 0).unwrap();
        assert_eq!((w, used), (syms(&[0, 0]), 1));
    }

    #[test]
    fn radix_code_roundtrip_and_range() {
        assert_eq!(radix_bits(2), 1);
        assert_eq!(radix_bits(3), 2);
        assert_eq!(radix_bits(4), 2);
        assert_eq!(radix_bits(5), 3);
        let mut b = Bits::new();
        radix_append(&mut b, Sym(2), 3);
        radix_append(&mut b, Sym(1), 3);
        assert_eq!(b, Bits::from("1001"));
        assert_eq!(radix_decode(&b, 0, 3).unwrap(), (Sym(2), 2));
        assert_eq!(radix_decode(&b, 2, 3).unwrap(), (Sym(1), 2));
        let bad = Bits::from("11");
        assert_eq!(radix_decode(&bad, 0, 3), Err(SfeError::SymbolRange { symbol: 3, sigma: 3 }));
        assert_eq!(radix_decode(&bad, 1, 3), Err(SfeError::OutOfBits));
    }

    #[test]
    fn explicit_measure_cylinders_sum_consistently() {
        let probs = vec![
            rat(1, 8),
            rat(1, 8),
            rat(1, 4),
            rat(0, 1),
            rat(1, 4),
            rat(1, 8),
            rat(1, 16),
            rat(1, 16),
        ];
        let m = ExplicitMeasure::new(2, 3, probs).unwrap();
        assert!(m.cylinder(&[]).is_one());
        assert_eq!(m.cylinder(&syms(&[0])), rat(1, 2));
        assert_eq!(m.cylinder(&syms(&[0, 1])), rat(1, 4));
        assert_eq!(m.cylinder(&syms(&[1, 1])), rat(1, 8));
        let split = m.cylinder(&syms(&[1, 0])) + m.cylinder(&syms(&[1, 1]));
        assert_eq!(split, m.cylinder(&syms(&[1])));
    }
}
