//! Deterministic test-sequence families.
//!
//! Every family is prefix-consistent: generating `n` symbols and then `m > n`
//! symbols with the same parameters agree on the first `n`. The iid family
//! uses SplitMix64 with fixed constants so snapshots are identical across
//! platforms.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_rational::BigRational;
use num_traits::Zero;

use crate::machine::{RationalDist, Sym};
use crate::numeric::prefix_sums;

/// SplitMix64 (Steele, Lea, Flood): 64-bit state, one additive constant and
/// two mixing multipliers. Small, portable, and good enough for test-instance
/// generation; not cryptographic.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `0..bound` by rejection-free multiply-shift.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }

    pub fn next_bool(&mut self) -> bool {
        self.next_u64() >> 63 == 1
    }

    /// Uniform dyadic rational in `[0, 1)` with 53 bits of resolution.
    pub fn next_unit(&mut self) -> BigRational {
        let num = self.next_u64() >> 11;
        BigRational::new((num as i64).into(), (1i64 << 53).into())
    }
}

#[derive(Clone, PartialEq, Debug)]
pub enum SequenceSpec {
    /// Repeats a fixed nonempty pattern.
    Periodic { pattern: Vec<Sym> },
    /// Digits of 1, 2, 3, ... written in the given base, most significant
    /// digit first, concatenated. Base must be at least 2 and no larger than
    /// the alphabet; digit `i` maps to symbol `i`.
    Champernowne { base: usize },
    /// The lexicographically least de Bruijn sequence of the given order over
    /// the full alphabet, repeated cyclically.
    DeBruijn { order: u32 },
    /// Independent draws from a distribution (uniform when omitted), seeded.
    Iid { seed: u64, dist: Option<RationalDist> },
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum SeqError {
    EmptyPattern,
    SymbolOutOfRange { symbol: u8, sigma: usize },
    BadBase { base: usize, sigma: usize },
    ZeroOrder,
    DistSize { got: usize, sigma: usize },
}

impl fmt::Display for SeqError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeqError::EmptyPattern => f.write_str("periodic pattern is empty"),
            SeqError::SymbolOutOfRange { symbol, sigma } => {
                write!(f, "pattern symbol {} outside alphabet of size {}", symbol, sigma)
            }
            SeqError::BadBase { base, sigma } => {
                write!(f, "base {} unusable with alphabet of size {} (need 2 <= base <= size)", base, sigma)
            }
            SeqError::ZeroOrder => f.write_str("de Bruijn order must be at least 1"),
            SeqError::DistSize { got, sigma } => {
                write!(f, "distribution over {} symbols for alphabet of size {}", got, sigma)
            }
        }
    }
}

impl SequenceSpec {
    /// Short canonical rendering, e.g. `periodic:01` style content summary.
    pub fn describe(&self) -> String {
        use alloc::format;
        match self {
            SequenceSpec::Periodic { pattern } => format!("periodic({} syms)", pattern.len()),
            SequenceSpec::Champernowne { base } => format!("champernowne(base {})", base),
            SequenceSpec::DeBruijn { order } => format!("debruijn(order {})", order),
            SequenceSpec::Iid { seed, .. } => format!("iid(seed {})", seed),
        }
    }
}

/// First `n` symbols of the family over an alphabet of size `sigma`.
pub fn generate(spec: &SequenceSpec, sigma: usize, n: usize) -> Result<Vec<Sym>, SeqError> {
    match spec {
        SequenceSpec::Periodic { pattern } => {
            if pattern.is_empty() {
                return Err(SeqError::EmptyPattern);
            }
            for &s in pattern {
                if s.0 as usize >= sigma {
                    return Err(SeqError::SymbolOutOfRange { symbol: s.0, sigma });
                }
            }
            Ok((0..n).map(|i| pattern[i % pattern.len()]).collect())
        }
        SequenceSpec::Champernowne { base } => {
            if *base < 2 || *base > sigma {
                return Err(SeqError::BadBase { base: *base, sigma });
            }
            let mut out = Vec::with_capacity(n);
            let mut next: u64 = 1;
            let mut digits: Vec<u8> = Vec::new();
            while out.len() < n {
                digits.clear();
                let mut v = next;
                while v > 0 {
                    digits.push((v % *base as u64) as u8);
                    v /= *base as u64;
                }
                for &d in digits.iter().rev() {
                    if out.len() == n {
                        break;
                    }
                    out.push(Sym(d));
                }
                next += 1;
            }
            Ok(out)
        }
        SequenceSpec::DeBruijn { order } => {
            if *order == 0 {
                return Err(SeqError::ZeroOrder);
            }
            let cycle = de_bruijn_cycle(sigma, *order as usize);
            Ok((0..n).map(|i| cycle[i % cycle.len()]).collect())
        }
        SequenceSpec::Iid { seed, dist } => {
            let uniform;
            let dist = match dist {
                Some(d) => {
                    if d.len() != sigma {
                        return Err(SeqError::DistSize { got: d.len(), sigma });
                    }
                    d
                }
                None => {
                    uniform = RationalDist::uniform(sigma);
                    &uniform
                }
            };
            let cum = prefix_sums(dist.probs());
            let mut rng = SplitMix64::new(*seed);
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                let u = rng.next_unit();
                // Last interval with cum[i] <= u; zero-mass symbols are skipped
                // because their interval is empty.
                let mut chosen = sigma - 1;
                for i in 0..sigma {
                    if u < cum[i + 1] && !dist.probs()[i].is_zero() {
                        chosen = i;
                        break;
                    }
                }
                out.push(Sym(chosen as u8));
            }
            Ok(out)
        }
    }
}

/// Lexicographically least de Bruijn cycle of the given order via Lyndon-word
/// concatenation; length `sigma^order`.
fn de_bruijn_cycle(sigma: usize, order: usize) -> Vec<Sym> {
    let mut seq = Vec::new();
    let mut a = alloc::vec![0u8; order + 1];
    fn walk(t: usize, p: usize, order: usize, sigma: usize, a: &mut [u8], seq: &mut Vec<Sym>) {
        if t > order {
            if order % p == 0 {
                for &d in &a[1..=p] {
                    seq.push(Sym(d));
                }
            }
        } else {
            a[t] = a[t - p];
            walk(t + 1, p, order, sigma, a, seq);
            for j in (a[t - p] + 1)..sigma as u8 {
                a[t] = j;
                walk(t + 1, t, order, sigma, a, seq);
            }
        }
    }
    walk(1, 1, order, sigma, &mut a, &mut seq);
    seq
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rat;
    use alloc::vec;

    fn labels(out: &[Sym]) -> String {
        out.iter().map(|s| char::from(b'0' + s.0)).collect()
    }

    #[test]
    fn periodic_repeats() {
        let spec = SequenceSpec::Periodic { pattern: vec![Sym(0), Sym(1)] };
        assert_eq!(labels(&generate(&spec, 2, 7).unwrap()), "0101010");
        assert!(matches!(
            generate(&SequenceSpec::Periodic { pattern: vec![] }, 2, 3),
            Err(SeqError::EmptyPattern)
        ));
        assert!(matches!(
            generate(&SequenceSpec::Periodic { pattern: vec![Sym(5)] }, 2, 3),
            Err(SeqError::SymbolOutOfRange { .. })
        ));
    }

    #[test]
    fn champernowne_base2_first_ten() {
        let spec = SequenceSpec::Champernowne { base: 2 };
        assert_eq!(labels(&generate(&spec, 2, 10).unwrap()), "1101110010");
    }

    #[test]
    fn champernowne_base_bounds() {
        assert!(matches!(
            generate(&SequenceSpec::Champernowne { base: 3 }, 2, 4),
            Err(SeqError::BadBase { .. })
        ));
        assert!(matches!(
            generate(&SequenceSpec::Champernowne { base: 1 }, 2, 4),
            Err(SeqError::BadBase { .. })
        ));
        // Base smaller than the alphabet is allowed.
        let spec = SequenceSpec::Champernowne { base: 2 };
        assert_eq!(labels(&generate(&spec, 3, 4).unwrap()), "1101");
    }

    #[test]
    fn debruijn_order_2_binary() {
        let spec = SequenceSpec::DeBruijn { order: 2 };
        // B(2,2) least cycle is 0011; every length-2 word appears cyclically.
        assert_eq!(labels(&generate(&spec, 2, 8).unwrap()), "00110011");
    }

    #[test]
    fn debruijn_covers_all_windows() {
        let order = 3;
        let spec = SequenceSpec::DeBruijn { order };
        let cycle_len = 2usize.pow(order);
        let s = generate(&spec, 2, cycle_len + order as usize - 1).unwrap();
        let mut seen = alloc::collections::BTreeSet::new();
        for win in s.windows(order as usize) {
            seen.insert(win.to_vec());
        }
        assert_eq!(seen.len(), cycle_len);
    }

    #[test]
    fn iid_is_deterministic_and_seed_sensitive() {
        let a = generate(&SequenceSpec::Iid { seed: 42, dist: None }, 2, 64).unwrap();
        let b = generate(&SequenceSpec::Iid { seed: 42, dist: None }, 2, 64).unwrap();
        let c = generate(&SequenceSpec::Iid { seed: 43, dist: None }, 2, 64).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn iid_respects_support() {
        let dist = RationalDist::new(vec![rat(0, 1), rat(1, 1)]).unwrap();
        let s = generate(&SequenceSpec::Iid { seed: 7, dist: Some(dist) }, 2, 100).unwrap();
        assert!(s.iter().all(|&x| x == Sym(1)));
    }

    #[test]
    fn iid_snapshot_is_platform_pinned() {
        // Frozen from the documented SplitMix64 constants; a change here means
        // the generator is no longer portable.
        let s = generate(&SequenceSpec::Iid { seed: 1, dist: None }, 2, 16).unwrap();
        assert_eq!(labels(&s), "1110011101010100");
    }

    #[test]
    fn prefix_consistency_across_families() {
        let specs = [
            SequenceSpec::Periodic { pattern: vec![Sym(0), Sym(1), Sym(1)] },
            SequenceSpec::Champernowne { base: 2 },
            SequenceSpec::DeBruijn { order: 3 },
            SequenceSpec::Iid { seed: 9, dist: None },
        ];
        for spec in &specs {
            let long = generate(spec, 2, 500).unwrap();
            let short = generate(spec, 2, 123).unwrap();
            assert_eq!(&long[..123], &short[..], "{:?}", spec);
        }
    }
}
