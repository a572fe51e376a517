//! The two machine transformations: a gambler that bets along a compressor's
//! output lengths, and a compressor that block-codes a gambler's bets.
//!
//! Both directions share the same head scheduling. The derived machine runs a
//! counter up to `n0` while moving its trailing heads ahead of the source's,
//! after which every trailing head sits exactly `k` time steps ahead. During
//! the first `ell` input symbols the derived machine is in a setup phase that
//! memorizes the prefix instead of doing real work; `ell` is a multiple of
//! `k`, so setup ends on a block boundary.
//!
//! Composite control states are built lazily. Simulating a run only ever
//! materializes the states that run visits, which keeps the exponential
//! setup-phase state space off the common path; a full table can still be
//! demanded through `materialize` under an explicit state budget.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;
use core::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::bits::Bits;
use crate::machine::{
    Alphabet, Fsm, MachineKind, MachineSpec, QId, Sym, TId, TableMachine,
};
use crate::numeric::{int_rat, ipow, pow2};
use crate::sfe::{self, CylinderMeasure, SfeError};
use crate::sim::{positions_through, speed_profile, Cursor};

#[derive(Debug, Clone, PartialEq)]
pub enum ConstructError {
    /// Trailing head keeps pace with the leading head; fold it away first.
    FullSpeedHead { head: usize },
    NotCompressor,
    NotGambler,
    /// Gambler assigns probability zero to some symbol; mix toward uniform
    /// before building a compressor from it.
    VanishingBets { state: String },
    /// The requested mix slack leaves no room for a positive mixing weight.
    MixingUnderflow,
    /// State enumeration would exceed the budget.
    Budget { needed: usize, limit: usize },
}

impl fmt::Display for ConstructError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstructError::FullSpeedHead { head } => {
                write!(f, "trailing head {head} moves every step; fold it before constructing")
            }
            ConstructError::NotCompressor => write!(f, "source machine is not a compressor"),
            ConstructError::NotGambler => write!(f, "source machine is not a gambler"),
            ConstructError::VanishingBets { state } => {
                write!(f, "gambler state {state} bets zero on some symbol")
            }
            ConstructError::MixingUnderflow => {
                write!(f, "no positive mixing weight satisfies the slack bound")
            }
            ConstructError::Budget { needed, limit } => {
                write!(f, "construction needs {needed} states, budget is {limit}")
            }
        }
    }
}

/// Catch-up length `n0` and setup length `ell` for block length `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetupParams {
    pub k: usize,
    pub n0: usize,
    pub ell: usize,
}

/// Smallest `n0` with `n >= pi_i(n + k)` for every trailing head `i` from
/// `n0` on, and the block-aligned setup length `ell >= n0 + k`.
pub fn setup_params<M: Fsm + ?Sized>(m: &M, k: usize) -> Result<SetupParams, ConstructError> {
    assert!(k >= 1, "block length must be positive");
    let h = m.heads();
    if h == 1 {
        return Ok(SetupParams { k, n0: 0, ell: k });
    }
    let prof = speed_profile(m);
    let one = BigRational::one();
    // n >= alpha(n+k) + |T| forces n >= pi_i(n+k), so the search below is
    // bounded; the threshold is monotone in n because the leading head gains
    // on every step some trailing head stands still.
    let mut cap = 0usize;
    for (i, alpha) in prof.alphas.iter().enumerate() {
        if alpha >= &one {
            return Err(ConstructError::FullSpeedHead { head: i + 1 });
        }
        let bound = ((alpha * int_rat(k as i64) + int_rat(m.t_count() as i64)) / (&one - alpha))
            .ceil()
            .to_integer()
            .to_usize()
            .expect("speed bound fits usize")
            + 1;
        cap = cap.max(bound);
    }
    let pos = positions_through(m, (cap + k) as u64);
    let mut n0 = 0usize;
    for i in 0..h - 1 {
        let ni = (0..=cap)
            .find(|&n| (n as u64) >= pos[n + k][i])
            .expect("search cap derived from the speed bound");
        n0 = n0.max(ni);
    }
    let ell = k * (n0 + k).div_ceil(k);
    Ok(SetupParams { k, n0, ell })
}

// --- replay over a schedule of trailing observations -----------------------

fn stitched(record: &[Vec<Sym>], i: usize, a: Sym) -> Vec<Sym> {
    let mut obs = record[i].clone();
    obs.push(a);
    obs
}

/// State reached from `q` after reading `w`, with trailing observations
/// supplied by the oldest entries of `record`.
pub fn replay_state<M: Fsm + ?Sized>(m: &M, q: QId, record: &[Vec<Sym>], w: &[Sym]) -> QId {
    assert!(w.len() <= record.len());
    let mut cur = q;
    for (i, &a) in w.iter().enumerate() {
        cur = m.next_q(cur, &stitched(record, i, a));
    }
    cur
}

/// Concatenated compressor output along the same replay.
pub fn replay_output<M: Fsm + ?Sized>(m: &M, q: QId, record: &[Vec<Sym>], w: &[Sym]) -> Bits {
    assert!(w.len() <= record.len() + 1);
    let mut cur = q;
    let mut out = Bits::new();
    for (i, &a) in w.iter().enumerate() {
        out.extend(&m.output(cur, a));
        if i + 1 < w.len() {
            cur = m.next_q(cur, &stitched(record, i, a));
        }
    }
    out
}

fn mass_total<M: Fsm + ?Sized>(
    m: &M,
    q: QId,
    record: &[Vec<Sym>],
    i: usize,
    len: usize,
    memo: &mut BTreeMap<(u32, usize), BigRational>,
) -> BigRational {
    if i == len {
        return BigRational::one();
    }
    if let Some(v) = memo.get(&(q.0, i)) {
        return v.clone();
    }
    let sigma = m.alphabet().size();
    let mut sum = BigRational::zero();
    for a in 0..sigma {
        let a = Sym(a as u8);
        let weight = pow2(-(m.output(q, a).len() as i64));
        sum += if i + 1 == len {
            weight
        } else {
            weight * mass_total(m, m.next_q(q, &stitched(record, i, a)), record, i + 1, len, memo)
        };
    }
    memo.insert((q.0, i), sum.clone());
    sum
}

/// Total output weight `sum over x in Sigma^len of 2^-|output(x)|` when the
/// compressor replays from `q` against the oldest `len - 1` record entries.
pub fn suffix_mass<M: Fsm + ?Sized>(m: &M, q: QId, record: &[Vec<Sym>], len: usize) -> BigRational {
    assert!(len <= record.len() + 1);
    let mut memo = BTreeMap::new();
    mass_total(m, q, record, 0, len, &mut memo)
}

/// Same weight restricted to continuations starting with `a`.
pub fn suffix_mass_narrowed<M: Fsm + ?Sized>(
    m: &M,
    q: QId,
    record: &[Vec<Sym>],
    a: Sym,
    len: usize,
) -> BigRational {
    assert!(len >= 1 && len <= record.len() + 1);
    let weight = pow2(-(m.output(q, a).len() as i64));
    if len == 1 {
        return weight;
    }
    let mut memo = BTreeMap::new();
    weight * mass_total(m, m.next_q(q, &stitched(record, 0, a)), record, 1, len, &mut memo)
}

/// Betting row proportional to the narrowed weights; sums to 1.
pub fn weight_bet_row<M: Fsm + ?Sized>(
    m: &M,
    q: QId,
    record: &[Vec<Sym>],
    len: usize,
) -> Vec<BigRational> {
    let sigma = m.alphabet().size();
    let mut memo = BTreeMap::new();
    let numer: Vec<BigRational> = (0..sigma)
        .map(|a| {
            let a = Sym(a as u8);
            let weight = pow2(-(m.output(q, a).len() as i64));
            if len == 1 {
                weight
            } else {
                weight
                    * mass_total(m, m.next_q(q, &stitched(record, 0, a)), record, 1, len, &mut memo)
            }
        })
        .collect();
    let total: BigRational = numer.iter().fold(BigRational::zero(), |s, x| s + x);
    numer.into_iter().map(|x| x / &total).collect()
}

// --- gambler bet products as a block measure --------------------------------

/// Probability a gambler's bets assign to length-`k` blocks read from `start`
/// with trailing observations supplied by `record`.
pub struct BlockMeasure<'m, M: Fsm + ?Sized> {
    g: &'m M,
    start: QId,
    record: Vec<Vec<Sym>>,
    k: usize,
}

impl<'m, M: Fsm + ?Sized> BlockMeasure<'m, M> {
    pub fn new(g: &'m M, start: QId, record: Vec<Vec<Sym>>, k: usize) -> Self {
        assert!(record.len() >= k);
        BlockMeasure { g, start, record, k }
    }
}

impl<M: Fsm + ?Sized> CylinderMeasure for BlockMeasure<'_, M> {
    fn sigma(&self) -> usize {
        self.g.alphabet().size()
    }

    fn block_len(&self) -> usize {
        self.k
    }

    fn cylinder(&self, prefix: &[Sym]) -> BigRational {
        assert!(prefix.len() <= self.k);
        let mut q = self.start;
        let mut mass = BigRational::one();
        for (i, &a) in prefix.iter().enumerate() {
            mass *= &self.g.bets(q)[a.0 as usize];
            q = self.g.next_q(q, &stitched(&self.record, i, a));
        }
        mass
    }
}

/// Product of the gambler's bets along `w` under the record's schedule.
pub fn bet_product<M: Fsm + ?Sized>(
    g: &M,
    q: QId,
    record: &[Vec<Sym>],
    w: &[Sym],
) -> BigRational {
    assert!(w.len() <= record.len());
    let mut cur = q;
    let mut mass = BigRational::one();
    for (i, &a) in w.iter().enumerate() {
        mass *= &g.bets(cur)[a.0 as usize];
        cur = g.next_q(cur, &stitched(record, i, a));
    }
    mass
}

/// All `sigma^k` block masses in lexicographic order.
pub fn block_measure_table<M: Fsm + ?Sized>(
    g: &M,
    q: QId,
    record: &[Vec<Sym>],
    k: usize,
) -> Vec<BigRational> {
    let sigma = g.alphabet().size();
    let mut out = Vec::with_capacity(sigma.pow(k as u32));
    let mut w = vec![Sym(0); k];
    loop {
        out.push(bet_product(g, q, record, &w));
        let mut i = k;
        loop {
            if i == 0 {
                return out;
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

// --- full-speed head elimination --------------------------------------------

/// Removes every trailing head that moves on all of its control cycle.
///
/// Such a head eventually trails the leading head by a fixed number of
/// symbols, so its observations are recoverable from a bounded buffer of
/// recently read symbols. The symbol states are expanded to carry that
/// buffer plus a copy of the movement state (the lag depends on where the
/// movement orbit is), and the trailing components are stitched back in
/// before consulting the original transition table.
pub fn fold_full_speed_heads(src: &TableMachine) -> Result<TableMachine, ConstructError> {
    let h = src.heads();
    let prof = speed_profile(src);
    let one = BigRational::one();
    let full: Vec<usize> = (0..h - 1).filter(|&i| prof.alphas[i] == one).collect();
    if full.is_empty() {
        return Ok(TableMachine::new_unchecked(src.spec().clone()));
    }
    let kept: Vec<usize> = (0..h - 1).filter(|i| !full.contains(i)).collect();

    // lag per movement state for each folded head; constant once the orbit
    // cycles because a full-speed head moves on every cycle step
    let steps = (prof.preperiod + prof.period) as usize;
    let pos = positions_through(src, steps as u64);
    let mut lag: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    let mut t = src.initial_state().0;
    for n in 0..=steps {
        let lags: Vec<usize> = full.iter().map(|&i| n - pos[n][i] as usize).collect();
        if let Some(prev) = lag.get(&t.0) {
            debug_assert_eq!(prev, &lags, "lag must be a function of the movement state");
        } else {
            lag.insert(t.0, lags);
        }
        t = src.next_t(t);
    }
    let buf_len = lag.values().flat_map(|v| v.iter().copied()).max().unwrap_or(0);

    let sigma = src.alphabet().size();
    let heads2 = 1 + kept.len();
    let obs_count = sigma.pow(heads2 as u32);
    let budget = 1usize << 20;

    #[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
    struct Folded {
        q: u32,
        buf: Vec<Sym>,
        tc: u32,
    }

    let start = Folded {
        q: src.initial_state().1 .0,
        buf: vec![Sym(0); buf_len],
        tc: src.initial_state().0 .0,
    };
    let mut intern: BTreeMap<Folded, u32> = BTreeMap::new();
    let mut states: Vec<Folded> = vec![start.clone()];
    intern.insert(start, 0);
    let mut delta_q: Vec<Vec<usize>> = Vec::new();
    let mut frontier = 0usize;
    while frontier < states.len() {
        let cur = states[frontier].clone();
        let mut row = Vec::with_capacity(obs_count);
        for packed in 0..obs_count {
            let obs2 = src.alphabet().unpack_obs(packed, heads2);
            let leading = *obs2.last().expect("leading symbol present");
            // reassemble the original observation vector
            let mut obs = Vec::with_capacity(h);
            let mut kept_it = obs2.iter();
            let lags = lag.get(&cur.tc).map(Vec::as_slice).unwrap_or(&[]);
            let mut fold_idx = 0usize;
            for i in 0..h - 1 {
                if full.contains(&i) {
                    let l = lags.get(fold_idx).copied().unwrap_or(0);
                    fold_idx += 1;
                    obs.push(if l == 0 { leading } else { cur.buf[buf_len - l] });
                } else {
                    obs.push(*kept_it.next().expect("kept observation"));
                }
            }
            obs.push(leading);
            let q2 = src.next_q(QId(cur.q), &obs).0;
            let mut buf2 = cur.buf.clone();
            if buf_len > 0 {
                buf2.remove(0);
                buf2.push(leading);
            }
            let next = Folded { q: q2, buf: buf2, tc: src.next_t(TId(cur.tc)).0 };
            let id = match intern.get(&next) {
                Some(&id) => id,
                None => {
                    if states.len() >= budget {
                        return Err(ConstructError::Budget { needed: states.len() + 1, limit: budget });
                    }
                    let id = states.len() as u32;
                    states.push(next.clone());
                    intern.insert(next, id);
                    id
                }
            };
            row.push(id as usize);
        }
        delta_q.push(row);
        frontier += 1;
    }

    let spec_src = src.spec();
    let q_names: Vec<String> = states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let buf: String = s.buf.iter().map(|x| src.alphabet().labels()[x.0 as usize].clone()).collect();
            format!("f{i}:{}/{}@{}", src.describe_q(QId(s.q)), buf, src.describe_t(TId(s.tc)))
        })
        .collect();
    let mu: Vec<Vec<bool>> = (0..src.t_count())
        .map(|t| kept.iter().map(|&i| src.movement(TId(t as u32))[i]).collect())
        .collect();
    let nu = spec_src.nu.as_ref().map(|_| {
        states
            .iter()
            .map(|s| (0..sigma).map(|a| src.output(QId(s.q), Sym(a as u8))).collect())
            .collect()
    });
    let beta = spec_src.beta.as_ref().map(|rows| {
        states.iter().map(|s| rows[s.q as usize].clone()).collect()
    });
    let spec = MachineSpec {
        kind: src.kind(),
        alphabet: src.alphabet().clone(),
        heads: heads2,
        t_names: spec_src.t_names.clone(),
        q_names,
        initial: (spec_src.initial.0, 0),
        delta_t: spec_src.delta_t.clone(),
        mu,
        delta_q,
        nu,
        beta,
        capital: spec_src.capital.clone(),
    };
    Ok(TableMachine::new(spec).expect("folded machine validates"))
}

// --- shared scaffolding for the lazy composites ------------------------------

struct Frame<'m> {
    src: &'m TableMachine,
    params: SetupParams,
    alphabet: Alphabet,
    heads: usize,
    t_delta: Vec<u32>,
    t_mu: Vec<Vec<bool>>,
    t_names: Vec<String>,
    t0: u32,
    /// Composite trailing positions at steps `0..=ell`.
    pi_prime: Vec<Vec<u64>>,
}

impl<'m> Frame<'m> {
    fn new(src: &'m TableMachine, k: usize) -> Result<Frame<'m>, ConstructError> {
        let params = setup_params(src, k)?;
        let h = src.heads();
        let nt = src.t_count();
        let n0 = params.n0;
        let width = n0 + 1;
        let src_pos = positions_through(src, (n0 + k) as u64);
        let adv_k: Vec<u32> = (0..nt)
            .map(|t| {
                let mut cur = TId(t as u32);
                for _ in 0..k {
                    cur = src.next_t(cur);
                }
                cur.0
            })
            .collect();
        let mut t_delta = vec![0u32; nt * width];
        let mut t_mu = Vec::with_capacity(nt * width);
        let mut t_names = Vec::with_capacity(nt * width);
        for t in 0..nt {
            for c in 0..width {
                let idx = t * width + c;
                let nc = if c < n0 { c + 1 } else { n0 };
                t_delta[idx] = (src.next_t(TId(t as u32)).0 as usize * width + nc) as u32;
                let row: Vec<bool> = (0..h - 1)
                    .map(|i| {
                        if c < n0 && (c as u64) < src_pos[c + k][i] {
                            true
                        } else {
                            src.movement(TId(adv_k[t]))[i]
                        }
                    })
                    .collect();
                t_mu.push(row);
                t_names.push(format!("{}+{}", src.describe_t(TId(t as u32)), c));
            }
        }
        let t0 = (src.initial_state().0 .0 as usize * width) as u32;
        let mut pi_prime = Vec::with_capacity(params.ell + 1);
        let mut pos = vec![0u64; h - 1];
        let mut tc = t0 as usize;
        for m in 0..=params.ell {
            pi_prime.push(pos.clone());
            if m < params.ell {
                for (j, moved) in t_mu[tc].iter().enumerate() {
                    if *moved {
                        pos[j] += 1;
                    }
                }
                tc = t_delta[tc] as usize;
            }
        }
        Ok(Frame {
            src,
            params,
            alphabet: src.alphabet().clone(),
            heads: h,
            t_delta,
            t_mu,
            t_names,
            t0,
            pi_prime,
        })
    }

    /// Record of the composite's own trailing observations over the last `k`
    /// setup steps, read off the completed setup prefix.
    fn boundary_record(&self, w: &[Sym]) -> Vec<Vec<Sym>> {
        debug_assert_eq!(w.len(), self.params.ell);
        let k = self.params.k;
        (0..k)
            .map(|r| {
                let m = self.params.ell - k + r;
                self.pi_prime[m].iter().map(|&p| w[p as usize]).collect()
            })
            .collect()
    }
}

fn render_record(alphabet: &Alphabet, rec: &[Vec<Sym>]) -> String {
    let mut out = String::new();
    for (i, v) in rec.iter().enumerate() {
        if i > 0 {
            out.push(';');
        }
        for s in v {
            out.push_str(&alphabet.labels()[s.0 as usize]);
        }
    }
    out
}

fn render_word(alphabet: &Alphabet, w: &[Sym]) -> String {
    let mut out = String::new();
    for s in w {
        out.push_str(&alphabet.labels()[s.0 as usize]);
    }
    out
}

// --- compressor to gambler ----------------------------------------------------

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum GamblerState {
    Setup { w: Vec<Sym> },
    Bet { q: u32, rec: Vec<Vec<Sym>>, j: usize, w: Vec<Sym> },
}

/// Inspection snapshot of one composite gambler state.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GamblerStateView {
    pub setup: bool,
    /// Source state being tracked; `None` during setup.
    pub src_q: Option<QId>,
    pub rec: Vec<Vec<Sym>>,
    pub j: usize,
    pub w: Vec<Sym>,
}

/// Gambler that recovers a compressor's output lengths as betting odds.
///
/// Post-setup bets on symbol `a` are proportional to the total output weight
/// of the block continuations that begin with `a`, so short output for a
/// symbol translates into a large bet on it.
pub struct LazyGambler<'m> {
    frame: Frame<'m>,
    states: RefCell<Vec<GamblerState>>,
    intern: RefCell<BTreeMap<GamblerState, u32>>,
    cursors: RefCell<BTreeMap<u32, Cursor>>,
    trans: RefCell<BTreeMap<(u32, usize), u32>>,
    rows: RefCell<BTreeMap<u32, Vec<BigRational>>>,
}

/// Builds the gambler for block length `k`. The compressor must not have
/// full-speed trailing heads; `fold_full_speed_heads` removes them.
pub fn compressor_to_gambler(
    src: &TableMachine,
    k: usize,
) -> Result<LazyGambler<'_>, ConstructError> {
    if src.kind() != MachineKind::Compressor {
        return Err(ConstructError::NotCompressor);
    }
    let frame = Frame::new(src, k)?;
    let lazy = LazyGambler {
        frame,
        states: RefCell::new(Vec::new()),
        intern: RefCell::new(BTreeMap::new()),
        cursors: RefCell::new(BTreeMap::new()),
        trans: RefCell::new(BTreeMap::new()),
        rows: RefCell::new(BTreeMap::new()),
    };
    let id0 = lazy.intern_state(GamblerState::Setup { w: Vec::new() });
    lazy.cursors.borrow_mut().insert(id0, Cursor::start(src));
    Ok(lazy)
}

impl<'m> LazyGambler<'m> {
    fn intern_state(&self, s: GamblerState) -> u32 {
        let mut map = self.intern.borrow_mut();
        if let Some(&id) = map.get(&s) {
            return id;
        }
        let mut v = self.states.borrow_mut();
        let id = v.len() as u32;
        v.push(s.clone());
        map.insert(s, id);
        id
    }

    pub fn params(&self) -> &SetupParams {
        &self.frame.params
    }

    pub fn source(&self) -> &TableMachine {
        self.frame.src
    }

    pub fn interned(&self) -> usize {
        self.states.borrow().len()
    }

    /// Drops derived caches; interned state identity is preserved.
    pub fn clear_caches(&self) {
        self.trans.borrow_mut().clear();
        self.rows.borrow_mut().clear();
    }

    pub fn inspect(&self, q: QId) -> GamblerStateView {
        match &self.states.borrow()[q.0 as usize] {
            GamblerState::Setup { w } => GamblerStateView {
                setup: true,
                src_q: None,
                rec: Vec::new(),
                j: w.len() % self.frame.params.k,
                w: w.clone(),
            },
            GamblerState::Bet { q, rec, j, w } => GamblerStateView {
                setup: false,
                src_q: Some(QId(*q)),
                rec: rec.clone(),
                j: *j,
                w: w.clone(),
            },
        }
    }

    /// Explores states reachable under arbitrary observations. Returns the
    /// interned count and whether a fixed point was reached.
    pub fn reachable_closure(
        &self,
        max_depth: Option<usize>,
        budget: usize,
    ) -> Result<(usize, bool), ConstructError> {
        closure_walk(
            budget,
            max_depth,
            self.frame.alphabet.size().pow(self.frame.heads as u32),
            self.frame.heads,
            &self.frame.alphabet,
            || self.interned(),
            |q, obs| self.next_q(q, obs),
        )
    }

    /// Full transition table under a state budget.
    pub fn materialize(&self, budget: usize) -> Result<TableMachine, ConstructError> {
        let (count, complete) = self.reachable_closure(None, budget)?;
        debug_assert!(complete);
        let obs_count = self.frame.alphabet.size().pow(self.frame.heads as u32);
        let delta_q: Vec<Vec<usize>> = (0..count)
            .map(|id| {
                (0..obs_count)
                    .map(|packed| {
                        let obs = self.frame.alphabet.unpack_obs(packed, self.frame.heads);
                        self.next_q(QId(id as u32), &obs).0 as usize
                    })
                    .collect()
            })
            .collect();
        let beta = (0..count).map(|id| {
            crate::machine::RationalDist::new(self.bets(QId(id as u32)))
                .expect("bet rows are distributions")
        });
        let q_names: Vec<String> =
            (0..count).map(|id| format!("g{id}:{}", self.describe_q(QId(id as u32)))).collect();
        let spec = MachineSpec {
            kind: MachineKind::Gambler,
            alphabet: self.frame.alphabet.clone(),
            heads: self.frame.heads,
            t_names: self.frame.t_names.clone(),
            q_names,
            initial: (self.frame.t0 as usize, 0),
            delta_t: self.frame.t_delta.iter().map(|&t| t as usize).collect(),
            mu: self.frame.t_mu.clone(),
            delta_q,
            nu: None,
            beta: Some(beta.collect()),
            capital: Some(BigRational::one()),
        };
        Ok(TableMachine::new(spec).expect("materialized gambler validates"))
    }
}

impl Fsm for LazyGambler<'_> {
    fn kind(&self) -> MachineKind {
        MachineKind::Gambler
    }

    fn alphabet(&self) -> &Alphabet {
        &self.frame.alphabet
    }

    fn heads(&self) -> usize {
        self.frame.heads
    }

    fn t_count(&self) -> usize {
        self.frame.t_delta.len()
    }

    fn initial_state(&self) -> (TId, QId) {
        (TId(self.frame.t0), QId(0))
    }

    fn next_t(&self, t: TId) -> TId {
        TId(self.frame.t_delta[t.0 as usize])
    }

    fn movement(&self, t: TId) -> &[bool] {
        &self.frame.t_mu[t.0 as usize]
    }

    fn next_q(&self, q: QId, obs: &[Sym]) -> QId {
        let packed = self.frame.alphabet.pack_obs(obs);
        if let Some(&id) = self.trans.borrow().get(&(q.0, packed)) {
            return QId(id);
        }
        let state = self.states.borrow()[q.0 as usize].clone();
        let k = self.frame.params.k;
        let a = *obs.last().expect("observation has a leading component");
        let next = match state {
            GamblerState::Setup { w } => {
                let mut w2 = w;
                w2.push(a);
                let mut cur = self.cursors.borrow()[&q.0].clone();
                cur.advance(self.frame.src, &w2);
                if w2.len() < self.frame.params.ell {
                    let id = self.intern_state(GamblerState::Setup { w: w2 });
                    self.cursors.borrow_mut().insert(id, cur);
                    id
                } else {
                    let rec = self.frame.boundary_record(&w2);
                    self.intern_state(GamblerState::Bet { q: cur.q.0, rec, j: 0, w: w2 })
                }
            }
            GamblerState::Bet { q: src_q, rec, j, w } => {
                let q2 = self.frame.src.next_q(QId(src_q), &stitched(&rec, 0, a)).0;
                let mut rec2: Vec<Vec<Sym>> = rec[1..].to_vec();
                rec2.push(obs[..self.frame.heads - 1].to_vec());
                self.intern_state(GamblerState::Bet { q: q2, rec: rec2, j: (j + 1) % k, w })
            }
        };
        self.trans.borrow_mut().insert((q.0, packed), next);
        QId(next)
    }

    fn output(&self, _q: QId, _a: Sym) -> Bits {
        panic!("gamblers have no output function");
    }

    fn bets(&self, q: QId) -> Vec<BigRational> {
        if let Some(row) = self.rows.borrow().get(&q.0) {
            return row.clone();
        }
        let sigma = self.frame.alphabet.size();
        let row = match &self.states.borrow()[q.0 as usize] {
            GamblerState::Setup { .. } => {
                vec![BigRational::new(1.into(), (sigma as i64).into()); sigma]
            }
            GamblerState::Bet { q, rec, j, .. } => {
                weight_bet_row(self.frame.src, QId(*q), rec, self.frame.params.k - j)
            }
        };
        self.rows.borrow_mut().insert(q.0, row.clone());
        row
    }

    fn capital(&self) -> BigRational {
        BigRational::one()
    }

    fn describe_t(&self, t: TId) -> String {
        self.frame.t_names[t.0 as usize].clone()
    }

    fn describe_q(&self, q: QId) -> String {
        let al = &self.frame.alphabet;
        match &self.states.borrow()[q.0 as usize] {
            GamblerState::Setup { w } => format!("setup[{}]", render_word(al, w)),
            GamblerState::Bet { q, rec, j, w } => format!(
                "bet[{}|{}|{}|{}]",
                self.frame.src.describe_q(QId(*q)),
                render_record(al, rec),
                j,
                render_word(al, w)
            ),
        }
    }
}

// --- gambler to compressor ----------------------------------------------------

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum CompressorState {
    Setup { w: Vec<Sym> },
    Block {
        q: u32,
        frozen: Vec<Vec<Sym>>,
        pending: Vec<Vec<Sym>>,
        z: Vec<Sym>,
        w: Vec<Sym>,
    },
}

/// Inspection snapshot of one composite compressor state.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CompressorStateView {
    pub setup: bool,
    /// Source state frozen at the current block's start; `None` during setup.
    pub src_q: Option<QId>,
    pub frozen: Vec<Vec<Sym>>,
    pub pending: Vec<Vec<Sym>>,
    /// Symbols read so far in the current block (derived during setup).
    pub z: Vec<Sym>,
    pub w: Vec<Sym>,
}

/// Compressor that block-codes a gambler's bets.
///
/// The block code's context is the source state and observation schedule
/// frozen at the block's start; both are recoverable from previously decoded
/// output, which is what makes the stream invertible. Mid-block steps emit
/// nothing, the block's final step emits the whole codeword.
pub struct LazyCompressor<'m> {
    frame: Frame<'m>,
    states: RefCell<Vec<CompressorState>>,
    intern: RefCell<BTreeMap<CompressorState, u32>>,
    cursors: RefCell<BTreeMap<u32, Cursor>>,
    trans: RefCell<BTreeMap<(u32, usize), u32>>,
}

/// Builds the compressor for block length `k`. The gambler must be
/// non-vanishing so every block has a codeword.
pub fn gambler_to_compressor(
    src: &TableMachine,
    k: usize,
) -> Result<LazyCompressor<'_>, ConstructError> {
    if src.kind() != MachineKind::Gambler {
        return Err(ConstructError::NotGambler);
    }
    for q in 0..src.q_count() {
        if src.bets(QId(q as u32)).iter().any(|b| b.is_zero()) {
            return Err(ConstructError::VanishingBets { state: src.describe_q(QId(q as u32)) });
        }
    }
    let frame = Frame::new(src, k)?;
    let lazy = LazyCompressor {
        frame,
        states: RefCell::new(Vec::new()),
        intern: RefCell::new(BTreeMap::new()),
        cursors: RefCell::new(BTreeMap::new()),
        trans: RefCell::new(BTreeMap::new()),
    };
    let id0 = lazy.intern_state(CompressorState::Setup { w: Vec::new() });
    lazy.cursors.borrow_mut().insert(id0, Cursor::start(src));
    Ok(lazy)
}

impl<'m> LazyCompressor<'m> {
    fn intern_state(&self, s: CompressorState) -> u32 {
        let mut map = self.intern.borrow_mut();
        if let Some(&id) = map.get(&s) {
            return id;
        }
        let mut v = self.states.borrow_mut();
        let id = v.len() as u32;
        v.push(s.clone());
        map.insert(s, id);
        id
    }

    pub fn params(&self) -> &SetupParams {
        &self.frame.params
    }

    pub fn source(&self) -> &TableMachine {
        self.frame.src
    }

    pub fn interned(&self) -> usize {
        self.states.borrow().len()
    }

    pub fn clear_caches(&self) {
        self.trans.borrow_mut().clear();
    }

    pub fn inspect(&self, q: QId) -> CompressorStateView {
        let k = self.frame.params.k;
        match &self.states.borrow()[q.0 as usize] {
            CompressorState::Setup { w } => {
                let pending = w.len() % k;
                CompressorStateView {
                    setup: true,
                    src_q: None,
                    frozen: Vec::new(),
                    pending: Vec::new(),
                    z: w[w.len() - pending..].to_vec(),
                    w: w.clone(),
                }
            }
            CompressorState::Block { q, frozen, pending, z, w } => CompressorStateView {
                setup: false,
                src_q: Some(QId(*q)),
                frozen: frozen.clone(),
                pending: pending.clone(),
                z: z.clone(),
                w: w.clone(),
            },
        }
    }

    /// Symbols of the unfinished block: exactly what the output stream is
    /// missing relative to the input read so far.
    pub fn pending_block(&self, q: QId) -> Vec<Sym> {
        self.inspect(q).z
    }

    pub fn reachable_closure(
        &self,
        max_depth: Option<usize>,
        budget: usize,
    ) -> Result<(usize, bool), ConstructError> {
        closure_walk(
            budget,
            max_depth,
            self.frame.alphabet.size().pow(self.frame.heads as u32),
            self.frame.heads,
            &self.frame.alphabet,
            || self.interned(),
            |q, obs| self.next_q(q, obs),
        )
    }

    pub fn materialize(&self, budget: usize) -> Result<TableMachine, ConstructError> {
        let (count, complete) = self.reachable_closure(None, budget)?;
        debug_assert!(complete);
        let sigma = self.frame.alphabet.size();
        let obs_count = sigma.pow(self.frame.heads as u32);
        let delta_q: Vec<Vec<usize>> = (0..count)
            .map(|id| {
                (0..obs_count)
                    .map(|packed| {
                        let obs = self.frame.alphabet.unpack_obs(packed, self.frame.heads);
                        self.next_q(QId(id as u32), &obs).0 as usize
                    })
                    .collect()
            })
            .collect();
        let nu: Vec<Vec<Bits>> = (0..count)
            .map(|id| (0..sigma).map(|a| self.output(QId(id as u32), Sym(a as u8))).collect())
            .collect();
        let q_names: Vec<String> =
            (0..count).map(|id| format!("c{id}:{}", self.describe_q(QId(id as u32)))).collect();
        let spec = MachineSpec {
            kind: MachineKind::Compressor,
            alphabet: self.frame.alphabet.clone(),
            heads: self.frame.heads,
            t_names: self.frame.t_names.clone(),
            q_names,
            initial: (self.frame.t0 as usize, 0),
            delta_t: self.frame.t_delta.iter().map(|&t| t as usize).collect(),
            mu: self.frame.t_mu.clone(),
            delta_q,
            nu: Some(nu),
            beta: None,
            capital: None,
        };
        Ok(TableMachine::new(spec).expect("materialized compressor validates"))
    }
}

impl Fsm for LazyCompressor<'_> {
    fn kind(&self) -> MachineKind {
        MachineKind::Compressor
    }

    fn alphabet(&self) -> &Alphabet {
        &self.frame.alphabet
    }

    fn heads(&self) -> usize {
        self.frame.heads
    }

    fn t_count(&self) -> usize {
        self.frame.t_delta.len()
    }

    fn initial_state(&self) -> (TId, QId) {
        (TId(self.frame.t0), QId(0))
    }

    fn next_t(&self, t: TId) -> TId {
        TId(self.frame.t_delta[t.0 as usize])
    }

    fn movement(&self, t: TId) -> &[bool] {
        &self.frame.t_mu[t.0 as usize]
    }

    fn next_q(&self, q: QId, obs: &[Sym]) -> QId {
        let packed = self.frame.alphabet.pack_obs(obs);
        if let Some(&id) = self.trans.borrow().get(&(q.0, packed)) {
            return QId(id);
        }
        let state = self.states.borrow()[q.0 as usize].clone();
        let k = self.frame.params.k;
        let a = *obs.last().expect("observation has a leading component");
        let trail = obs[..self.frame.heads - 1].to_vec();
        let next = match state {
            CompressorState::Setup { w } => {
                let mut w2 = w;
                w2.push(a);
                let mut cur = self.cursors.borrow()[&q.0].clone();
                cur.advance(self.frame.src, &w2);
                if w2.len() < self.frame.params.ell {
                    let id = self.intern_state(CompressorState::Setup { w: w2 });
                    self.cursors.borrow_mut().insert(id, cur);
                    id
                } else {
                    let rec = self.frame.boundary_record(&w2);
                    self.intern_state(CompressorState::Block {
                        q: cur.q.0,
                        frozen: rec,
                        pending: Vec::new(),
                        z: Vec::new(),
                        w: w2,
                    })
                }
            }
            CompressorState::Block { q: src_q, frozen, mut pending, mut z, w } => {
                pending.push(trail);
                if z.len() < k - 1 {
                    z.push(a);
                    self.intern_state(CompressorState::Block { q: src_q, frozen, pending, z, w })
                } else {
                    let mut block = z;
                    block.push(a);
                    let q2 = replay_state(self.frame.src, QId(src_q), &frozen, &block).0;
                    self.intern_state(CompressorState::Block {
                        q: q2,
                        frozen: pending,
                        pending: Vec::new(),
                        z: Vec::new(),
                        w,
                    })
                }
            }
        };
        self.trans.borrow_mut().insert((q.0, packed), next);
        QId(next)
    }

    fn output(&self, q: QId, a: Sym) -> Bits {
        let k = self.frame.params.k;
        match &self.states.borrow()[q.0 as usize] {
            CompressorState::Setup { .. } => {
                let mut out = Bits::new();
                sfe::radix_append(&mut out, a, self.frame.alphabet.size());
                out
            }
            CompressorState::Block { q, frozen, z, .. } => {
                if z.len() < k - 1 {
                    Bits::new()
                } else {
                    let mut block = z.clone();
                    block.push(a);
                    let measure = BlockMeasure::new(self.frame.src, QId(*q), frozen.clone(), k);
                    sfe::sfe_encode(&measure, &block).expect("non-vanishing source gambler")
                }
            }
        }
    }

    fn bets(&self, _q: QId) -> Vec<BigRational> {
        panic!("compressors have no betting function");
    }

    fn capital(&self) -> BigRational {
        panic!("compressors have no capital");
    }

    fn describe_t(&self, t: TId) -> String {
        self.frame.t_names[t.0 as usize].clone()
    }

    fn describe_q(&self, q: QId) -> String {
        let al = &self.frame.alphabet;
        match &self.states.borrow()[q.0 as usize] {
            CompressorState::Setup { w } => format!("setup[{}]", render_word(al, w)),
            CompressorState::Block { q, frozen, pending, z, w } => format!(
                "blk[{}|{}|{}|{}|{}]",
                self.frame.src.describe_q(QId(*q)),
                render_record(al, frozen),
                render_record(al, pending),
                render_word(al, z),
                render_word(al, w)
            ),
        }
    }
}

fn closure_walk(
    budget: usize,
    max_depth: Option<usize>,
    obs_count: usize,
    heads: usize,
    alphabet: &Alphabet,
    interned: impl Fn() -> usize,
    next: impl Fn(QId, &[Sym]) -> QId,
) -> Result<(usize, bool), ConstructError> {
    let mut depth_of: BTreeMap<u32, usize> = BTreeMap::new();
    depth_of.insert(0, 0);
    let mut queue: Vec<u32> = vec![0];
    let mut head = 0usize;
    let mut complete = true;
    while head < queue.len() {
        let id = queue[head];
        head += 1;
        let d = depth_of[&id];
        if let Some(cap) = max_depth {
            if d >= cap {
                complete = false;
                continue;
            }
        }
        for packed in 0..obs_count {
            let obs = alphabet.unpack_obs(packed, heads);
            let nid = next(QId(id), &obs).0;
            if interned() > budget {
                return Err(ConstructError::Budget { needed: interned(), limit: budget });
            }
            depth_of.entry(nid).or_insert_with(|| {
                queue.push(nid);
                d + 1
            });
        }
    }
    Ok((interned(), complete))
}

// --- mixing toward uniform ------------------------------------------------------

/// Replaces each betting row by `(1-lambda) row + lambda uniform`, with the
/// largest `lambda` of denominator at most 2^16 satisfying
/// `(1 - lambda) >= 2^-eps`, found by walking the mediant tree. That loss
/// bound keeps the mixed gambler's capital within a factor `2^(-eps n)` of
/// the original after `n` steps.
pub fn make_non_vanishing(
    src: &TableMachine,
    eps: &BigRational,
) -> Result<(TableMachine, BigRational), ConstructError> {
    if src.kind() != MachineKind::Gambler {
        return Err(ConstructError::NotGambler);
    }
    assert!(!eps.is_negative(), "slack must be nonnegative");
    let c = eps.numer().to_i64().expect("slack numerator fits i64");
    let d = eps.denom().to_i64().expect("slack denominator fits i64");
    // (1 - p/q)^d >= 2^-c  <=>  (q-p)^d 2^c >= q^d
    let admissible = |p: i64, q: i64| -> bool {
        ipow(&(q - p).into(), d) * pow2(c) >= ipow(&q.into(), d)
    };
    const MAX_DEN: i64 = 1 << 16;
    let (mut lo, mut hi) = ((0i64, 1i64), (1i64, 1i64));
    let mut best = (0i64, 1i64);
    loop {
        let med = (lo.0 + hi.0, lo.1 + hi.1);
        if med.1 > MAX_DEN {
            break;
        }
        if admissible(med.0, med.1) {
            best = med;
            lo = med;
        } else {
            hi = med;
        }
    }
    let lambda = BigRational::new(best.0.into(), best.1.into());
    let vanishing = (0..src.q_count())
        .any(|q| src.bets(QId(q as u32)).iter().any(|b| b.is_zero()));
    if lambda.is_zero() && vanishing {
        return Err(ConstructError::MixingUnderflow);
    }
    let sigma = src.alphabet().size();
    let keep = BigRational::one() - &lambda;
    let fill = &lambda / int_rat(sigma as i64);
    let mut spec = src.spec().clone();
    let rows = spec.beta.as_mut().expect("gambler has betting rows");
    for row in rows.iter_mut() {
        let mixed: Vec<BigRational> =
            row.probs().iter().map(|b| b * &keep + &fill).collect();
        *row = crate::machine::RationalDist::new(mixed).expect("mixed row is a distribution");
    }
    Ok((TableMachine::new(spec).expect("mixed gambler validates"), lambda))
}

// --- inverting the block-coded stream --------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum StreamDecodeError {
    Code(SfeError),
    Machine(ConstructError),
    /// Setup segment is not a whole number of fixed-width symbols.
    RaggedSetup { bits: usize },
    /// Pending-block tail must be shorter than the block length.
    TailTooLong { got: usize, k: usize },
    /// Tail disagrees with the symbols the stream itself encodes.
    TailInconsistent,
}

impl fmt::Display for StreamDecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StreamDecodeError::Code(e) => write!(f, "block code: {e}"),
            StreamDecodeError::Machine(e) => write!(f, "construction: {e}"),
            StreamDecodeError::RaggedSetup { bits } => {
                write!(f, "setup segment of {bits} bits is ragged")
            }
            StreamDecodeError::TailTooLong { got, k } => {
                write!(f, "pending tail of {got} symbols, block length is {k}")
            }
            StreamDecodeError::TailInconsistent => {
                write!(f, "pending tail disagrees with the decoded stream")
            }
        }
    }
}

impl From<SfeError> for StreamDecodeError {
    fn from(e: SfeError) -> Self {
        StreamDecodeError::Code(e)
    }
}

impl From<ConstructError> for StreamDecodeError {
    fn from(e: ConstructError) -> Self {
        StreamDecodeError::Machine(e)
    }
}

/// Inverts the block-coding compressor built from `g` with block length `k`.
///
/// `tail` is the unfinished block held in the compressor's final state; the
/// stream itself carries the setup prefix and every completed block. Block
/// contexts are re-derived from already-decoded symbols, which stays ahead of
/// the stream because trailing observations only ever look at positions
/// before the current block.
pub fn full_stream_decode(
    g: &TableMachine,
    k: usize,
    bits: &Bits,
    tail: &[Sym],
) -> Result<Vec<Sym>, StreamDecodeError> {
    if g.kind() != MachineKind::Gambler {
        return Err(ConstructError::NotGambler.into());
    }
    let params = setup_params(g, k)?;
    let sigma = g.alphabet().size();
    let width = sfe::radix_bits(sigma);
    let setup_bits = params.ell * width;

    if bits.len() < setup_bits {
        if bits.len() % width != 0 {
            return Err(StreamDecodeError::RaggedSetup { bits: bits.len() });
        }
        let n = bits.len() / width;
        let mut s = Vec::with_capacity(n);
        for i in 0..n {
            let (sym, _) = sfe::radix_decode(bits, i * width, sigma)?;
            s.push(sym);
        }
        if tail != &s[n - n % k..] {
            return Err(StreamDecodeError::TailInconsistent);
        }
        return Ok(s);
    }

    let mut s = Vec::with_capacity(params.ell);
    for i in 0..params.ell {
        let (sym, _) = sfe::radix_decode(bits, i * width, sigma)?;
        s.push(sym);
    }
    let mut cur = Cursor::start(g);
    for _ in 0..params.ell {
        cur.advance(g, &s);
    }
    // source head positions, extended as decoding progresses
    let mut pos: Vec<Vec<u64>> = vec![vec![0; g.heads() - 1]];
    let mut post = g.initial_state().0;
    let mut offset = setup_bits;
    while offset < bits.len() {
        let n = s.len();
        while pos.len() <= n + k {
            let last = pos.last().expect("seeded").clone();
            let mv = g.movement(post);
            let stepped: Vec<u64> =
                last.iter().zip(mv).map(|(p, &m)| p + m as u64).collect();
            pos.push(stepped);
            post = g.next_t(post);
        }
        let record: Vec<Vec<Sym>> = (0..k)
            .map(|r| {
                pos[n + r]
                    .iter()
                    .map(|&p| {
                        assert!((p as usize) < n, "trailing observation inside decoded prefix");
                        s[p as usize]
                    })
                    .collect()
            })
            .collect();
        let measure = BlockMeasure::new(g, cur.q, record, k);
        let (word, used) = sfe::sfe_decode(&measure, bits, offset)?;
        offset += used;
        s.extend(word);
        for _ in 0..k {
            cur.advance(g, &s);
        }
    }
    if tail.len() >= k {
        return Err(StreamDecodeError::TailTooLong { got: tail.len(), k });
    }
    s.extend_from_slice(tail);
    Ok(s)
}
