//! Exact helpers for powers, integer logarithms, and certified base-2
//! logarithm bounds on positive rationals.
//!
//! Comparisons everywhere else in the crate are cleared to integer arithmetic;
//! the interval logarithm here exists for rendering values like
//! `log2(capital)` in reports with a known error bound, never for verdicts.

use alloc::vec::Vec;
use core::cmp::Ordering;

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub fn big(n: i64) -> BigInt {
    BigInt::from(n)
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int_rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// `base^e` for a signed exponent; `base` must be nonzero when `e < 0`.
pub fn ipow(base: &BigInt, e: i64) -> BigRational {
    let mag = base.magnitude().pow(e.unsigned_abs() as u32);
    let sign = if base.is_negative() && e % 2 != 0 { Sign::Minus } else { Sign::Plus };
    let p = BigInt::from_biguint(sign, mag);
    if e >= 0 {
        BigRational::from_integer(p)
    } else {
        assert!(!p.is_zero(), "negative power of zero");
        BigRational::new(BigInt::one(), p)
    }
}

/// `2^e` as an exact rational, any sign of `e`.
pub fn pow2(e: i64) -> BigRational {
    ipow(&big(2), e)
}

/// `sigma^e` as an exact rational, any sign of `e`.
pub fn sigma_pow(sigma: usize, e: i64) -> BigRational {
    ipow(&big(sigma as i64), e)
}

/// `r^e` for rational `r > 0` and signed integer exponent.
pub fn rat_pow(r: &BigRational, e: i64) -> BigRational {
    assert!(r.is_positive(), "rational power of non-positive base");
    let n = ipow(r.numer(), e);
    let d = ipow(r.denom(), e);
    n / d
}

/// The integer `e` with `2^e <= x < 2^(e+1)`; requires `x > 0`.
pub fn floor_log2(x: &BigRational) -> i64 {
    assert!(x.is_positive(), "floor_log2 of non-positive value");
    let p = x.numer().magnitude();
    let q = x.denom().magnitude();
    // p/q in [2^e, 2^(e+1)) iff q << e <= p (for e >= 0), symmetric otherwise.
    let mut e = p.bits() as i64 - q.bits() as i64;
    let le = |e: i64| -> bool {
        // 2^e <= p/q ?
        if e >= 0 {
            (q << e as u64) <= *p
        } else {
            *q <= (p << (-e) as u64)
        }
    };
    if !le(e) {
        e -= 1;
    } else if le(e + 1) {
        e += 1;
    }
    debug_assert!(le(e) && !le(e + 1));
    e
}

/// Smallest integer `m >= 0` with `2^m * p >= 1`; requires `0 < p <= 1`.
///
/// Equals the exact ceiling of `-log2(p)`.
pub fn ceil_neg_log2(p: &BigRational) -> u64 {
    assert!(p.is_positive() && *p <= BigRational::one(), "ceil_neg_log2 domain");
    (-floor_log2(p)) as u64
}

/// Certified bounds `lo <= log2(x) <= hi` with `hi - lo <= 2^(1-frac_bits)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Log2Interval {
    pub lo: BigRational,
    pub hi: BigRational,
}

impl Log2Interval {
    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn midpoint(&self) -> BigRational {
        (&self.hi + &self.lo) / int_rat(2)
    }

    pub fn to_f64(&self) -> f64 {
        self.midpoint().to_f64().unwrap_or(f64::NAN)
    }
}

/// Certified dyadic bounds on `log2(x)` for rational `x > 0`.
///
/// Mantissa squaring with directed rounding: the lower chain floors and the
/// upper chain ceils every intermediate, so monotonicity of squaring makes the
/// emitted expansions genuine bounds regardless of accumulated error; the
/// guard bits only keep the interval narrow.
pub fn log2_interval(x: &BigRational, frac_bits: u32) -> Log2Interval {
    assert!(x.is_positive(), "log2 of non-positive value");
    let e = floor_log2(x);
    let prec = frac_bits as u64 + 32;
    // y = x / 2^e in [1, 2), as dyadic mantissas m/2^prec from below and above.
    let p = x.numer().magnitude().clone();
    let q = x.denom().magnitude().clone();
    let (np, nq) = if e >= 0 { (p, q << e as u64) } else { (p << (-e) as u64, q) };
    let scaled = &np << prec;
    let mut m_lo: BigUint = &scaled / &nq;
    let mut m_hi: BigUint = (&scaled + &nq - BigUint::one()) / &nq;

    let one_shift = BigUint::one() << prec; // 2^prec, mantissa for y = 1
    let two_shift = &one_shift << 1u32;
    let mut acc_lo = BigUint::zero();
    let mut acc_hi = BigUint::zero();
    for _ in 0..frac_bits {
        m_lo = (&m_lo * &m_lo) >> prec;
        let sq = &m_hi * &m_hi;
        m_hi = (&sq + &one_shift - BigUint::one()) >> prec;
        acc_lo <<= 1u32;
        if m_lo >= two_shift {
            m_lo >>= 1u32;
            acc_lo += BigUint::one();
        }
        acc_hi <<= 1u32;
        if m_hi >= two_shift {
            m_hi = (&m_hi + BigUint::one()) >> 1u32;
            acc_hi += BigUint::one();
        }
    }
    let denom = BigInt::from(BigUint::one() << frac_bits);
    let base = int_rat(e);
    let lo = &base + BigRational::new(BigInt::from(acc_lo), denom.clone());
    let hi = &base + BigRational::new(BigInt::from(acc_hi) + BigInt::one(), denom);
    Log2Interval { lo, hi }
}

/// `log2(x)` rendered to f64 from a 128-bit certified interval.
pub fn log2_f64(x: &BigRational) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    log2_interval(x, 128).to_f64()
}

/// Compares `a` against `b * sigma^e` exactly, `a, b > 0`, `e` rational.
///
/// Clearing denominators: with `e = c/d` (lowest terms, `d > 0`) this is
/// `(a/b)^d` versus `sigma^c`, an integer comparison.
pub fn cmp_rat_sigma_pow(a: &BigRational, b: &BigRational, sigma: usize, e: &BigRational) -> Ordering {
    assert!(a.is_positive() && b.is_positive());
    let c = e.numer();
    let d = e.denom().to_i64().expect("exponent denominator fits i64");
    let ratio = a / b;
    let lhs = rat_pow(&ratio, d);
    let c_i64 = c.to_i64().expect("exponent numerator fits i64");
    let rhs = sigma_pow(sigma, c_i64);
    lhs.cmp(&rhs)
}

/// Cumulative sums of a list of rationals: `out[i] = sum of xs[..i]`.
pub fn prefix_sums(xs: &[BigRational]) -> Vec<BigRational> {
    let mut out = Vec::with_capacity(xs.len() + 1);
    let mut acc = BigRational::zero();
    out.push(acc.clone());
    for x in xs {
        acc += x;
        out.push(acc.clone());
    }
    out
}
