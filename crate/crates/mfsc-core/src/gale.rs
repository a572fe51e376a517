//! Exact martingale and s-gale evaluation for gambler machines.
//!
//! The martingale value after reading `w` is `c0 * prod(sigma * bet_i)`. The
//! s-gale value scales it by `sigma^((s-1)|w|)`, which is irrational for
//! fractional `s` on most alphabets, so it is kept in split mantissa-exponent
//! form and compared against 1 by clearing to integer powers.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::machine::{Fsm, MachineKind, Sym};
use crate::numeric::{cmp_rat_sigma_pow, int_rat, log2_f64};
use crate::sim::{run_gambler_trace, Cursor, SimError};

/// `mantissa * sigma^exponent` with exact rational parts.
#[derive(Clone, PartialEq, Debug)]
pub struct GaleValue {
    pub mantissa: BigRational,
    pub sigma: usize,
    pub exponent: BigRational,
}

impl GaleValue {
    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    /// Exact comparison against 1.
    pub fn cmp_one(&self) -> Ordering {
        if self.mantissa.is_zero() {
            return Ordering::Less;
        }
        assert!(self.mantissa.is_positive(), "negative capital");
        // mantissa * sigma^e vs 1  <=>  mantissa vs sigma^(-e)
        cmp_rat_sigma_pow(&self.mantissa, &BigRational::one(), self.sigma, &-self.exponent.clone())
    }

    /// `log2` of the value rendered from certified interval bounds.
    pub fn log2(&self) -> f64 {
        if self.mantissa.is_zero() {
            return f64::NEG_INFINITY;
        }
        let exp = self.exponent.to_f64().unwrap_or(f64::NAN);
        log2_f64(&self.mantissa) + exp * log2_f64(&int_rat(self.sigma as i64))
    }
}

impl fmt::Display for GaleValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} * {}^({})", self.mantissa, self.sigma, self.exponent)
    }
}

/// Martingale value `d(w)`.
pub fn martingale_value<M: Fsm + ?Sized>(m: &M, w: &[Sym]) -> Result<BigRational, SimError> {
    let mut capitals = run_gambler_trace(m, w)?.capitals;
    Ok(capitals.pop().expect("capitals nonempty"))
}

/// Martingale values on every prefix of `w`, length `|w| + 1`.
pub fn martingale_values<M: Fsm + ?Sized>(m: &M, w: &[Sym]) -> Result<Vec<BigRational>, SimError> {
    Ok(run_gambler_trace(m, w)?.capitals)
}

/// s-gale value `d^(s)(w) = sigma^((s-1)|w|) * d(w)` in split form.
pub fn sgale_value<M: Fsm + ?Sized>(
    m: &M,
    s: &BigRational,
    w: &[Sym],
) -> Result<GaleValue, SimError> {
    let mantissa = martingale_value(m, w)?;
    let exponent = (s - int_rat(1)) * int_rat(w.len() as i64);
    Ok(GaleValue { mantissa, sigma: m.alphabet().size(), exponent })
}

/// Exact verdict of `d^(s)(w)` against 1.
pub fn compare_gale_to_one<M: Fsm + ?Sized>(
    m: &M,
    s: &BigRational,
    w: &[Sym],
) -> Result<Ordering, SimError> {
    Ok(sgale_value(m, s, w)?.cmp_one())
}

/// A prefix where the averaging identity fails, with both sides exact.
#[derive(Clone, PartialEq, Debug)]
pub struct IdentityCounterexample {
    pub w: Vec<Sym>,
    pub lhs: BigRational,
    pub rhs: BigRational,
}

/// Checks `d(w) = sigma^-1 * sum_a d(wa)` on every `w` up to `depth`.
///
/// Scaling by `sigma^(s-1)` turns this into the s-gale identity for any `s`,
/// so one check covers them all. Returns the first violation in depth-first
/// preorder, or `None` if the identity holds everywhere in range.
pub fn check_gale_identity<M: Fsm + ?Sized>(
    m: &M,
    depth: usize,
) -> Result<Option<IdentityCounterexample>, SimError> {
    if m.kind() != MachineKind::Gambler {
        return Err(SimError::KindMismatch { expected: MachineKind::Gambler, found: m.kind() });
    }
    let sigma = m.alphabet().size();
    let sigma_rat = int_rat(sigma as i64);
    let mut w: Vec<Sym> = Vec::new();
    // Stack of (cursor, capital) mirroring the prefix in `w`.
    let mut stack: Vec<(Cursor, BigRational)> = alloc::vec![(Cursor::start(m), m.capital())];
    loop {
        let (cursor, capital) = stack.last().unwrap().clone();
        // Identity at the current prefix: sum of child capitals over sigma.
        let bets = m.bets(cursor.q);
        let child_sum: BigRational =
            bets.iter().map(|b| &capital * &sigma_rat * b).sum();
        let rhs = child_sum / &sigma_rat;
        if rhs != capital {
            return Ok(Some(IdentityCounterexample { w: w.clone(), lhs: capital, rhs }));
        }
        // Descend leftmost-first while under depth, else advance to the next
        // sibling, popping completed levels.
        if w.len() < depth {
            let a = Sym(0);
            w.push(a);
            let mut next = cursor.clone();
            let cap = &capital * &sigma_rat * &bets[0];
            next.advance(m, &w);
            stack.push((next, cap));
            continue;
        }
        loop {
            let Some(&last) = w.last() else {
                return Ok(None);
            };
            stack.pop();
            w.pop();
            if (last.0 as usize) + 1 < sigma {
                let a = Sym(last.0 + 1);
                let (cursor, capital) = stack.last().unwrap().clone();
                let bet = m.bets(cursor.q)[a.0 as usize].clone();
                w.push(a);
                let mut next = cursor;
                let cap = capital * &sigma_rat * bet;
                next.advance(m, &w);
                stack.push((next, cap));
                break;
            }
        }
    }
}

/// One checkpoint sample of an s-gale along a sequence.
#[derive(Clone, PartialEq, Debug)]
pub struct ProbeSample {
    pub n: u64,
    pub value: GaleValue,
    pub log2: f64,
}

/// s-gale values sampled at strictly increasing prefix lengths.
#[derive(Clone, PartialEq, Debug)]
pub struct SuccessProbe {
    pub s: BigRational,
    pub samples: Vec<ProbeSample>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ProbeError {
    Sim(SimError),
    /// Checkpoints must be strictly increasing and within the sequence.
    BadCheckpoints(String),
}

impl fmt::Display for ProbeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbeError::Sim(e) => e.fmt(f),
            ProbeError::BadCheckpoints(msg) => write!(f, "bad checkpoints: {}", msg),
        }
    }
}

impl From<SimError> for ProbeError {
    fn from(e: SimError) -> Self {
        ProbeError::Sim(e)
    }
}

/// Samples `d^(s)` along `seq` at the given checkpoints.
pub fn success_probe<M: Fsm + ?Sized>(
    m: &M,
    s: &BigRational,
    seq: &[Sym],
    checkpoints: &[u64],
) -> Result<SuccessProbe, ProbeError> {
    for pair in checkpoints.windows(2) {
        if pair[0] >= pair[1] {
            return Err(ProbeError::BadCheckpoints(alloc::format!(
                "{} then {} is not increasing",
                pair[0],
                pair[1]
            )));
        }
    }
    if let Some(&last) = checkpoints.last() {
        if last as usize > seq.len() {
            return Err(ProbeError::BadCheckpoints(alloc::format!(
                "checkpoint {} beyond sequence length {}",
                last,
                seq.len()
            )));
        }
    }
    let capitals = martingale_values(m, seq)?;
    let sigma = m.alphabet().size();
    let samples = checkpoints
        .iter()
        .map(|&n| {
            let exponent = (s - int_rat(1)) * int_rat(n as i64);
            let value = GaleValue { mantissa: capitals[n as usize].clone(), sigma, exponent };
            let log2 = value.log2();
            ProbeSample { n, value, log2 }
        })
        .collect();
    Ok(SuccessProbe { s: s.clone(), samples })
}
