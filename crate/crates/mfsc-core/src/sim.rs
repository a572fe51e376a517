//! Exact step-by-step simulation: head kinematics, traces, compressor runs
//! and gambler runs.
//!
//! Head positions are oblivious, so kinematics (`position_vector`,
//! `speed_profile`) need no input sequence. A trailing head's long-run speed
//! is the fraction of moving steps around the movement control's cycle, and
//! its position never strays from `speed * n` by more than the number of
//! movement states.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use num_rational::BigRational;
use num_traits::Zero;

use crate::bits::Bits;
use crate::machine::{Fsm, MachineKind, QId, Sym, TId};

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum SimError {
    KindMismatch { expected: MachineKind, found: MachineKind },
    SymbolOutOfRange { position: usize, symbol: u8, sigma: usize },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::KindMismatch { expected, found } => {
                write!(f, "expected a {}, got a {}", expected, found)
            }
            SimError::SymbolOutOfRange { position, symbol, sigma } => {
                write!(f, "symbol index {} at position {} outside alphabet of size {}", symbol, position, sigma)
            }
        }
    }
}

fn check_input<M: Fsm + ?Sized>(m: &M, w: &[Sym]) -> Result<(), SimError> {
    let sigma = m.alphabet().size();
    for (i, s) in w.iter().enumerate() {
        if s.0 as usize >= sigma {
            return Err(SimError::SymbolOutOfRange { position: i, symbol: s.0, sigma });
        }
    }
    Ok(())
}

/// Incremental simulation state: control pair, step count, and trailing-head
/// positions. Cloning is cheap, which makes depth-first enumeration over
/// input trees convenient.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Cursor {
    pub t: TId,
    pub q: QId,
    pub n: u64,
    pub positions: Vec<u64>,
}

impl Cursor {
    pub fn start<M: Fsm + ?Sized>(m: &M) -> Self {
        let (t, q) = m.initial_state();
        Cursor { t, q, n: 0, positions: alloc::vec![0; m.heads() - 1] }
    }

    /// Observation vector at the current step; `w` must contain at least
    /// `n + 1` symbols.
    pub fn observation<M: Fsm + ?Sized>(&self, m: &M, w: &[Sym]) -> Vec<Sym> {
        let mut obs = Vec::with_capacity(m.heads());
        for &p in &self.positions {
            obs.push(w[p as usize]);
        }
        obs.push(w[self.n as usize]);
        obs
    }

    /// Consumes `w[n]` and advances one step.
    pub fn advance<M: Fsm + ?Sized>(&mut self, m: &M, w: &[Sym]) {
        let obs = self.observation(m, w);
        self.q = m.next_q(self.q, &obs);
        for (p, &moves) in self.positions.iter_mut().zip(m.movement(self.t)) {
            *p += moves as u64;
        }
        self.t = m.next_t(self.t);
        self.n += 1;
    }
}

/// Trailing-head positions after `n` steps.
pub fn position_vector<M: Fsm + ?Sized>(m: &M, n: u64) -> Vec<u64> {
    let mut pos = alloc::vec![0u64; m.heads() - 1];
    let (mut t, _) = m.initial_state();
    for _ in 0..n {
        for (p, &moves) in pos.iter_mut().zip(m.movement(t)) {
            *p += moves as u64;
        }
        t = m.next_t(t);
    }
    pos
}

/// Positions for every step `0..=n`, one vector per step.
pub fn positions_through<M: Fsm + ?Sized>(m: &M, n: u64) -> Vec<Vec<u64>> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut pos = alloc::vec![0u64; m.heads() - 1];
    let (mut t, _) = m.initial_state();
    out.push(pos.clone());
    for _ in 0..n {
        for (p, &moves) in pos.iter_mut().zip(m.movement(t)) {
            *p += moves as u64;
        }
        t = m.next_t(t);
        out.push(pos.clone());
    }
    out
}

/// Long-run head speeds plus the deviation bound `|position - speed*n| <=
/// slack` that oblivious movement guarantees.
#[derive(Clone, PartialEq, Debug)]
pub struct SpeedProfile {
    /// One speed per trailing head, each in `[0, 1]`.
    pub alphas: Vec<BigRational>,
    /// Steps before the movement control enters its cycle.
    pub preperiod: u64,
    pub period: u64,
    /// Deviation bound; equals the movement state count.
    pub slack: u64,
}

/// Detects the movement orbit and averages move flags around its cycle.
pub fn speed_profile<M: Fsm + ?Sized>(m: &M) -> SpeedProfile {
    let (t0, _) = m.initial_state();
    let mut first_seen: BTreeMap<u32, u64> = BTreeMap::new();
    let mut orbit: Vec<TId> = Vec::new();
    let mut t = t0;
    let (preperiod, period) = loop {
        if let Some(&f) = first_seen.get(&t.0) {
            break (f, orbit.len() as u64 - f);
        }
        first_seen.insert(t.0, orbit.len() as u64);
        orbit.push(t);
        t = m.next_t(t);
    };
    let trailing = m.heads() - 1;
    let mut alphas = Vec::with_capacity(trailing);
    for i in 0..trailing {
        let moves: i64 = orbit[preperiod as usize..]
            .iter()
            .map(|&t| m.movement(t)[i] as i64)
            .sum();
        alphas.push(BigRational::new(moves.into(), (period as i64).into()));
    }
    SpeedProfile { alphas, preperiod, period, slack: m.t_count() as u64 }
}

/// Long-run speed of trailing head `i`.
pub fn head_speed<M: Fsm + ?Sized>(m: &M, i: usize) -> BigRational {
    speed_profile(m).alphas.swap_remove(i)
}

/// Per-step record of a run.
#[derive(Clone, PartialEq, Debug)]
pub struct HeadTrace {
    /// Control states before each step; length `n + 1`.
    pub states: Vec<(TId, QId)>,
    /// Trailing-head positions before each step; length `n + 1`.
    pub positions: Vec<Vec<u64>>,
    /// Observation vector consumed at each step; length `n`.
    pub observations: Vec<Vec<Sym>>,
}

impl HeadTrace {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// A compressor run: concatenated output plus per-step emissions.
#[derive(Clone, PartialEq, Debug)]
pub struct CompressorRun {
    pub output: Bits,
    /// Bits emitted at each step; length `n`.
    pub step_outputs: Vec<Bits>,
    pub trace: HeadTrace,
}

/// A gambler run: capital after each prefix plus the bet placed on each
/// consumed symbol.
#[derive(Clone, PartialEq, Debug)]
pub struct GamblerRun {
    /// `capitals[i]` is the martingale value on `w[..i]`; length `n + 1`.
    pub capitals: Vec<BigRational>,
    /// Bet placed on the symbol actually read; length `n`.
    pub bets_taken: Vec<BigRational>,
    pub trace: HeadTrace,
}

fn trace_run<M: Fsm + ?Sized>(m: &M, w: &[Sym]) -> HeadTrace {
    let mut cursor = Cursor::start(m);
    let mut states = Vec::with_capacity(w.len() + 1);
    let mut positions = Vec::with_capacity(w.len() + 1);
    let mut observations = Vec::with_capacity(w.len());
    states.push((cursor.t, cursor.q));
    positions.push(cursor.positions.clone());
    for _ in 0..w.len() {
        observations.push(cursor.observation(m, w));
        cursor.advance(m, w);
        states.push((cursor.t, cursor.q));
        positions.push(cursor.positions.clone());
    }
    HeadTrace { states, positions, observations }
}

pub fn run_compressor<M: Fsm + ?Sized>(m: &M, w: &[Sym]) -> Result<CompressorRun, SimError> {
    if m.kind() != MachineKind::Compressor {
        return Err(SimError::KindMismatch { expected: MachineKind::Compressor, found: m.kind() });
    }
    check_input(m, w)?;
    let trace = trace_run(m, w);
    let mut output = Bits::new();
    let mut step_outputs = Vec::with_capacity(w.len());
    for (n, &a) in w.iter().enumerate() {
        let (_, q) = trace.states[n];
        let emitted = m.output(q, a);
        output.extend(&emitted);
        step_outputs.push(emitted);
    }
    Ok(CompressorRun { output, step_outputs, trace })
}

pub fn run_gambler_trace<M: Fsm + ?Sized>(m: &M, w: &[Sym]) -> Result<GamblerRun, SimError> {
    if m.kind() != MachineKind::Gambler {
        return Err(SimError::KindMismatch { expected: MachineKind::Gambler, found: m.kind() });
    }
    check_input(m, w)?;
    let trace = trace_run(m, w);
    let sigma = m.alphabet().size() as i64;
    let sigma_rat = BigRational::from_integer(sigma.into());
    let mut capitals = Vec::with_capacity(w.len() + 1);
    let mut bets_taken = Vec::with_capacity(w.len());
    let mut capital = m.capital();
    capitals.push(capital.clone());
    for (n, &a) in w.iter().enumerate() {
        let (_, q) = trace.states[n];
        let bet = m.bets(q)[a.0 as usize].clone();
        // Fair-odds payout: capital scales by sigma * bet each step.
        capital = if capital.is_zero() { capital } else { capital * &sigma_rat * &bet };
        capitals.push(capital.clone());
        bets_taken.push(bet);
    }
    Ok(GamblerRun { capitals, bets_taken, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::fixtures;
    use crate::numeric::{int_rat, rat};
    use alloc::vec;

    fn syms(s: &str) -> Vec<Sym> {
        s.bytes().map(|b| Sym(b - b'0')).collect()
    }

    #[test]
    fn half_speed_positions() {
        // Moves at steps 0, 2, 4: position after 5 steps is 3.
        let m = fixtures::half_speed_compressor();
        assert_eq!(position_vector(&m, 0), vec![0]);
        assert_eq!(position_vector(&m, 1), vec![1]);
        assert_eq!(position_vector(&m, 2), vec![1]);
        assert_eq!(position_vector(&m, 3), vec![2]);
        assert_eq!(position_vector(&m, 4), vec![2]);
        assert_eq!(position_vector(&m, 5), vec![3]);
    }

    #[test]
    fn half_speed_profile() {
        let m = fixtures::half_speed_compressor();
        let p = speed_profile(&m);
        assert_eq!(p.alphas, vec![rat(1, 2)]);
        assert_eq!(p.preperiod, 0);
        assert_eq!(p.period, 2);
        assert_eq!(p.slack, 2);
        assert_eq!(head_speed(&m, 0), rat(1, 2));
    }

    #[test]
    fn speed_bound_holds_on_fixture() {
        let m = fixtures::half_speed_compressor();
        let p = speed_profile(&m);
        for (n, pos) in positions_through(&m, 200).iter().enumerate() {
            let drift = &p.alphas[0] * int_rat(n as i64);
            let lo = &drift - int_rat(p.slack as i64);
            let hi = &drift + int_rat(p.slack as i64);
            let x = int_rat(pos[0] as i64);
            assert!(lo <= x && x <= hi, "speed bound violated at n={}", n);
        }
    }

    #[test]
    fn stationary_head_speed_is_zero() {
        let mut spec = fixtures::half_speed_compressor().spec().clone();
        spec.mu = vec![vec![false], vec![false]];
        let m = crate::machine::TableMachine::new(spec).unwrap();
        assert_eq!(head_speed(&m, 0), rat(0, 1));
    }

    #[test]
    fn compressor_run_concatenates_outputs() {
        let m = fixtures::identity_compressor();
        let run = run_compressor(&m, &syms("0110")).unwrap();
        assert_eq!(run.output, Bits::from("0110"));
        assert_eq!(run.step_outputs.len(), 4);
        assert_eq!(run.trace.states.len(), 5);
    }

    #[test]
    fn alternation_gambler_capital_growth() {
        // Betting 3/4 correctly on (01)^m yields (3/2)^(2m).
        let m = fixtures::alternation_gambler();
        let run = run_gambler_trace(&m, &syms("010101")).unwrap();
        assert_eq!(run.capitals[6], rat(3, 2) * rat(3, 2) * rat(3, 2) * rat(3, 2) * rat(3, 2) * rat(3, 2));
        assert!(run.bets_taken.iter().all(|b| *b == rat(3, 4)));
    }

    #[test]
    fn zero_bet_kills_capital_permanently() {
        let mut spec = fixtures::alternation_gambler().spec().clone();
        spec.beta = Some(vec![
            crate::machine::RationalDist::new(vec![int_rat(1), int_rat(0)]).unwrap(),
            crate::machine::RationalDist::uniform(2),
        ]);
        let m = crate::machine::TableMachine::new(spec).unwrap();
        let run = run_gambler_trace(&m, &syms("100")).unwrap();
        assert_eq!(run.capitals[1], int_rat(0));
        assert_eq!(run.capitals[3], int_rat(0));
    }

    #[test]
    fn kind_mismatch_is_an_error() {
        let m = fixtures::identity_compressor();
        assert!(matches!(
            run_gambler_trace(&m, &syms("0")),
            Err(SimError::KindMismatch { .. })
        ));
    }

    #[test]
    fn out_of_range_symbol_is_an_error() {
        let m = fixtures::identity_compressor();
        assert!(matches!(
            run_compressor(&m, &[Sym(7)]),
            Err(SimError::SymbolOutOfRange { position: 0, symbol: 7, .. })
        ));
    }

    #[test]
    fn two_head_observation_reads_both_positions() {
        let m = fixtures::half_speed_compressor();
        let w = syms("0111");
        let run = run_compressor(&m, &w).unwrap();
        // Step 3: trailing head at position 2, leading at 3.
        assert_eq!(run.trace.observations[3], vec![Sym(1), Sym(1)]);
        // Step 1: trailing head at position 1 (moved at step 0), leading at 1.
        assert_eq!(run.trace.observations[1], vec![Sym(1), Sym(1)]);
        assert_eq!(run.trace.observations[0], vec![Sym(0), Sym(0)]);
    }
}
