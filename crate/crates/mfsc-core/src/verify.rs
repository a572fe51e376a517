//! Independent oracles for everything the construction pipeline promises.
//!
//! Each checker re-derives its verdict from scratch: losslessness by
//! enumerating inputs, capital bounds by evaluating both sides in exact
//! rational arithmetic, theorem chains by sweeping an (s, n) grid. No float
//! ever enters a verdict; floats appear only as rendered log columns.
//!
//! Checkers come in pairs where that helps testing: `check_*` drives the
//! machine itself, `check_*_on` re-checks a prepared [`CompositeGamblerRun`],
//! which also lets a test cross-wire a mutated machine against an honest run
//! to confirm the checker notices.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::bits::Bits;
use crate::construct::{
    compressor_to_gambler, gambler_to_compressor, make_non_vanishing, suffix_mass,
    ConstructError, GamblerStateView, LazyGambler, SetupParams,
};
use crate::gale::{martingale_value, martingale_values, GaleValue};
use crate::machine::{
    Alphabet, Fsm, MachineKind, MachineSpec, QId, RationalDist, Sym, TId, TableMachine,
};
use crate::numeric::{cmp_rat_sigma_pow, floor_log2, int_rat, pow2, rat, rat_pow, sigma_pow};
use crate::seq::SplitMix64;
use crate::sfe::{radix_append, radix_bits};
use crate::sim::{
    positions_through, run_compressor, run_gambler_trace, speed_profile, Cursor, SimError,
};

#[derive(Debug, Clone, PartialEq)]
pub enum VerifyError {
    /// Exhaustive enumeration would exceed the hard budget.
    Budget { needed: u64, limit: u64 },
    Sim(SimError),
    Construct(ConstructError),
}

impl fmt::Display for VerifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerifyError::Budget { needed, limit } => {
                write!(f, "enumeration needs {needed} words, budget is {limit}")
            }
            VerifyError::Sim(e) => write!(f, "{e}"),
            VerifyError::Construct(e) => write!(f, "{e}"),
        }
    }
}

impl From<SimError> for VerifyError {
    fn from(e: SimError) -> Self {
        VerifyError::Sim(e)
    }
}

impl From<ConstructError> for VerifyError {
    fn from(e: ConstructError) -> Self {
        VerifyError::Construct(e)
    }
}

pub fn describe_machine(m: &TableMachine) -> String {
    let kind = match m.kind() {
        MachineKind::Compressor => "compressor",
        MachineKind::Gambler => "gambler",
    };
    format!(
        "{kind} sigma={} heads={} |T|={} |Q|={}",
        m.alphabet().size(),
        m.heads(),
        m.t_count(),
        m.q_count()
    )
}

fn render_word(w: &[Sym]) -> String {
    if w.is_empty() {
        return "-".into();
    }
    w.iter().map(|s| s.0.to_string()).collect::<Vec<_>>().join("")
}

/// One checked claim with both sides rendered exactly.
#[derive(Debug, Clone)]
pub struct LemmaReport {
    pub lemma: &'static str,
    pub machine: String,
    /// Ordered (name, value) pairs: k, m, j, n, eps and any extras.
    pub params: Vec<(&'static str, String)>,
    pub lhs: String,
    pub rhs: String,
    /// True iff the stated (in)equality is exactly satisfied.
    pub holds: bool,
    /// Input prefix that witnesses a violation.
    pub witness: Option<String>,
}

impl LemmaReport {
    pub fn param(&self, name: &str) -> Option<&str> {
        self.params.iter().find(|(n, _)| *n == name).map(|(_, v)| v.as_str())
    }
}

impl fmt::Display for LemmaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.holds { "holds" } else { "VIOLATED" };
        write!(f, "{} [{verdict}] {}", self.lemma, self.machine)?;
        for (k, v) in &self.params {
            write!(f, " {k}={v}")?;
        }
        write!(f, " lhs={} rhs={}", self.lhs, self.rhs)?;
        if let Some(w) = &self.witness {
            write!(f, " witness={w}")?;
        }
        Ok(())
    }
}

/// Two distinct inputs the compressor maps to the same output and state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IlCollision {
    pub first: Vec<Sym>,
    pub second: Vec<Sym>,
    pub output: Bits,
    pub t: TId,
    pub q: QId,
}

pub const IL_ENUM_BUDGET: u64 = 1 << 22;

fn next_word(w: &mut [Sym], sigma: usize) -> bool {
    for i in (0..w.len()).rev() {
        if (w[i].0 as usize) + 1 < sigma {
            w[i] = Sym(w[i].0 + 1);
            for x in &mut w[i + 1..] {
                *x = Sym(0);
            }
            return true;
        }
        w[i] = Sym(0);
    }
    false
}

/// Exhaustively tests injectivity of `w -> (C(w), t, q)` over `|w| <= max_len`.
///
/// Words are visited shortest first, lexicographically within a length, and
/// the empty word participates. Returns the earliest collision in that order,
/// where "earliest" means the second member of the pair appears first.
pub fn check_information_lossless<M: Fsm + ?Sized>(
    c: &M,
    max_len: usize,
) -> Result<Option<IlCollision>, VerifyError> {
    if c.kind() != MachineKind::Compressor {
        return Err(VerifyError::Sim(SimError::KindMismatch {
            expected: MachineKind::Compressor,
            found: c.kind(),
        }));
    }
    let sigma = c.alphabet().size();
    let needed = (sigma as u64).checked_pow(max_len as u32).unwrap_or(u64::MAX);
    if needed > IL_ENUM_BUDGET {
        return Err(VerifyError::Budget { needed, limit: IL_ENUM_BUDGET });
    }
    let mut seen: BTreeMap<(Bits, u32, u32), Vec<Sym>> = BTreeMap::new();
    for len in 0..=max_len {
        let mut w = vec![Sym(0); len];
        loop {
            // Rerun from scratch per word; enumeration order matters more
            // than shaving the O(len) factor here.
            let mut cur = Cursor::start(c);
            let mut out = Bits::new();
            for &a in &w {
                out.extend(&c.output(cur.q, a));
                cur.advance(c, &w);
            }
            let key = (out.clone(), cur.t.0, cur.q.0);
            if let Some(prev) = seen.get(&key) {
                return Ok(Some(IlCollision {
                    first: prev.clone(),
                    second: w,
                    output: out,
                    t: cur.t,
                    q: cur.q,
                }));
            }
            seen.insert(key, w.clone());
            if !next_word(&mut w, sigma) {
                break;
            }
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedViolation {
    pub head: usize,
    pub n: u64,
    pub position: u64,
    pub deviation: BigRational,
    pub slack: u64,
}

/// Confirms every trailing head stays within the movement-state count of its
/// asymptotic line: `|pi_i(n) - alpha_i * n| <= |T|` for all `n <= n_max`.
pub fn check_speed_bound<M: Fsm + ?Sized>(m: &M, n_max: u64) -> Option<SpeedViolation> {
    let prof = speed_profile(m);
    let slack = int_rat(prof.slack as i64);
    for (n, row) in positions_through(m, n_max).into_iter().enumerate() {
        for (i, alpha) in prof.alphas.iter().enumerate() {
            let dev = (int_rat(row[i] as i64) - alpha * int_rat(n as i64)).abs();
            if dev > slack {
                return Some(SpeedViolation {
                    head: i,
                    n: n as u64,
                    position: row[i],
                    deviation: dev,
                    slack: prof.slack,
                });
            }
        }
    }
    None
}

/// One full drive of the block gambler built from a compressor, bundling the
/// per-step state views and the source's cumulative output lengths that the
/// capital bounds compare against.
pub struct CompositeGamblerRun<'m> {
    pub gambler: LazyGambler<'m>,
    pub input: Vec<Sym>,
    /// `capitals[i] = d(input[..i])`; length n+1.
    pub capitals: Vec<BigRational>,
    /// `views[i]` describes the gambler state before step i; length n+1.
    pub views: Vec<GamblerStateView>,
    /// `cum_bits[i]` = source output length on `input[..i]`; length n+1.
    pub cum_bits: Vec<u64>,
}

impl CompositeGamblerRun<'_> {
    pub fn params(&self) -> &SetupParams {
        self.gambler.params()
    }

    pub fn source(&self) -> &TableMachine {
        self.gambler.source()
    }
}

pub fn composite_gambler_run<'m>(
    c: &'m TableMachine,
    k: usize,
    s: &[Sym],
) -> Result<CompositeGamblerRun<'m>, VerifyError> {
    let gambler = compressor_to_gambler(c, k)?;
    let run = run_gambler_trace(&gambler, s)?;
    let views = run.trace.states.iter().map(|&(_, q)| gambler.inspect(q)).collect();
    let comp = run_compressor(c, s)?;
    let mut cum_bits = Vec::with_capacity(s.len() + 1);
    let mut acc = 0u64;
    cum_bits.push(0);
    for step in &comp.step_outputs {
        acc += step.len() as u64;
        cum_bits.push(acc);
    }
    Ok(CompositeGamblerRun {
        gambler,
        input: s.to_vec(),
        capitals: run.capitals,
        views,
        cum_bits,
    })
}

/// Capital-ratio identity across a block suffix: from the boundary `mk` to
/// offset `j <= k`, the gambler's growth factor equals
/// `sigma^j * 2^-(source output bits) * (suffix mass ratio)` exactly.
///
/// `nu_source` supplies output lengths and suffix masses; pass the run's own
/// source for the honest check, or a mutated sibling to prove the checker has
/// teeth.
pub fn check_suffix_equality_on(
    nu_source: &TableMachine,
    run: &CompositeGamblerRun<'_>,
    m_blocks: usize,
    j: usize,
) -> LemmaReport {
    let p = run.params();
    let (k, ell) = (p.k, p.ell);
    assert!(j <= k, "offset past block end");
    assert!(m_blocks * k >= ell, "boundary inside setup");
    let n = m_blocks * k + j;
    assert!(n < run.views.len(), "input shorter than mk+j");
    let sigma = nu_source.alphabet().size();

    let lhs = &run.capitals[n] / &run.capitals[m_blocks * k];

    let mut consumed: u64 = 0;
    for i in m_blocks * k..n {
        let q = run.views[i].src_q.expect("post-setup view");
        consumed += nu_source.nu_len(q, run.input[i]);
    }
    let top = &run.views[n];
    let bot = &run.views[m_blocks * k];
    let gamma_top = suffix_mass(nu_source, top.src_q.unwrap(), &top.rec, k - j);
    let gamma_bot = suffix_mass(nu_source, bot.src_q.unwrap(), &bot.rec, k);
    let rhs = sigma_pow(sigma, j as i64) * pow2(-(consumed as i64)) * gamma_top / gamma_bot;

    let holds = lhs == rhs;
    LemmaReport {
        lemma: "suffix-ratio",
        machine: describe_machine(run.source()),
        params: vec![
            ("k", k.to_string()),
            ("m", m_blocks.to_string()),
            ("j", j.to_string()),
            ("n", n.to_string()),
        ],
        lhs: lhs.to_string(),
        rhs: rhs.to_string(),
        holds,
        witness: (!holds).then(|| render_word(&run.input[..n])),
    }
}

pub fn check_suffix_equality(
    c: &TableMachine,
    k: usize,
    m_blocks: usize,
    j: usize,
    s: &[Sym],
) -> Result<LemmaReport, VerifyError> {
    let run = composite_gambler_run(c, k, s)?;
    Ok(check_suffix_equality_on(c, &run, m_blocks, j))
}

/// Block-boundary capital floor: the source's output length discounts the
/// capital by at most the product of per-block suffix masses.
pub fn check_block_bound_on(run: &CompositeGamblerRun<'_>, m_blocks: usize) -> LemmaReport {
    let p = run.params();
    let (k, ell) = (p.k, p.ell);
    let n = m_blocks * k;
    assert!(n >= ell, "boundary inside setup");
    assert!(n < run.views.len(), "input shorter than mk");
    let src = run.source();
    let sigma = src.alphabet().size();

    let mut gamma_product = BigRational::one();
    for i in ell / k..m_blocks {
        let v = &run.views[i * k];
        gamma_product *= suffix_mass(src, v.src_q.unwrap(), &v.rec, k);
    }
    let out = run.cum_bits[n] as i64;
    let rhs = sigma_pow(sigma, n as i64 - ell as i64) * pow2(-out) / gamma_product;
    let lhs = run.capitals[n].clone();
    let holds = lhs >= rhs;
    LemmaReport {
        lemma: "block-product",
        machine: describe_machine(src),
        params: vec![
            ("k", k.to_string()),
            ("m", m_blocks.to_string()),
            ("n", n.to_string()),
            ("output_bits", out.to_string()),
        ],
        lhs: lhs.to_string(),
        rhs: rhs.to_string(),
        holds,
        witness: (!holds).then(|| render_word(&run.input[..n])),
    }
}

pub fn check_block_bound(
    c: &TableMachine,
    k: usize,
    m_blocks: usize,
    s: &[Sym],
) -> Result<LemmaReport, VerifyError> {
    let run = composite_gambler_run(c, k, s)?;
    Ok(check_block_bound_on(&run, m_blocks))
}

fn count_ceiling(src: &TableMachine, k: usize) -> u64 {
    (k as u64 * src.max_output_len() + 1) * src.t_count() as u64 * src.q_count() as u64
}

/// Block bound with every suffix mass replaced by the uniform counting
/// ceiling `(kM+1)|T||Q|`, exponent `m`. The sharper exponent `m - ell/k`
/// that this relaxes is evaluated alongside as informational columns; the
/// verdict is about the stated form only.
pub fn check_divisible_bound_on(run: &CompositeGamblerRun<'_>, m_blocks: usize) -> LemmaReport {
    let p = run.params();
    let (k, ell) = (p.k, p.ell);
    let n = m_blocks * k;
    assert!(n >= ell, "boundary inside setup");
    assert!(n < run.views.len(), "input shorter than mk");
    let src = run.source();
    let sigma = src.alphabet().size();

    let b = int_rat(count_ceiling(src, k) as i64);
    let out = run.cum_bits[n] as i64;
    let base = sigma_pow(sigma, n as i64 - ell as i64) * pow2(-out);
    let rhs = &base / rat_pow(&b, m_blocks as i64);
    let sharp_rhs = &base / rat_pow(&b, (m_blocks - ell / k) as i64);
    let lhs = run.capitals[n].clone();
    let holds = lhs >= rhs;
    let sharp_holds = lhs >= sharp_rhs;
    LemmaReport {
        lemma: "divisible-count",
        machine: describe_machine(src),
        params: vec![
            ("k", k.to_string()),
            ("m", m_blocks.to_string()),
            ("n", n.to_string()),
            ("output_bits", out.to_string()),
            ("B", b.to_string()),
            ("sharp_rhs", sharp_rhs.to_string()),
            ("sharp_holds", sharp_holds.to_string()),
        ],
        lhs: lhs.to_string(),
        rhs: rhs.to_string(),
        holds,
        witness: (!holds).then(|| render_word(&run.input[..n])),
    }
}

pub fn check_divisible_bound(
    c: &TableMachine,
    k: usize,
    m_blocks: usize,
    s: &[Sym],
) -> Result<LemmaReport, VerifyError> {
    let run = composite_gambler_run(c, k, s)?;
    Ok(check_divisible_bound_on(&run, m_blocks))
}

/// Capital floor at arbitrary `n`, block-aligned or not: padding the last
/// partial block costs at most `2^-kM` and one more counting factor.
pub fn check_general_bound_on(run: &CompositeGamblerRun<'_>, n: usize) -> LemmaReport {
    let p = run.params();
    let (k, ell) = (p.k, p.ell);
    assert!(n < run.views.len(), "input shorter than n");
    let src = run.source();
    let sigma = src.alphabet().size();

    let b = int_rat(count_ceiling(src, k) as i64);
    let km = k as i64 * src.max_output_len() as i64;
    let out = run.cum_bits[n] as i64;
    let rhs = pow2(-out - km) * sigma_pow(sigma, n as i64 - ell as i64)
        / rat_pow(&b, n.div_ceil(k) as i64);
    let lhs = run.capitals[n].clone();
    let holds = lhs >= rhs;
    LemmaReport {
        lemma: "general-floor",
        machine: describe_machine(src),
        params: vec![
            ("k", k.to_string()),
            ("n", n.to_string()),
            ("output_bits", out.to_string()),
            ("B", b.to_string()),
            ("kM", km.to_string()),
        ],
        lhs: lhs.to_string(),
        rhs: rhs.to_string(),
        holds,
        witness: (!holds).then(|| render_word(&run.input[..n])),
    }
}

pub fn check_general_bound(
    c: &TableMachine,
    k: usize,
    n: usize,
    s: &[Sym],
) -> Result<LemmaReport, VerifyError> {
    let run = composite_gambler_run(c, k, s)?;
    Ok(check_general_bound_on(&run, n))
}

/// Output-length ceiling for the block compressor built from gambler `g`.
/// The log form `|C_k| <= 2n/k + (n+ell) log sigma + ell + log c0 - log d`
/// is compared with all logarithms cleared:
/// `2^(k |C_k|) * d^k <= 2^(2n + ell k) * sigma^((n+ell) k) * c0^k`.
pub fn check_compressor_bound(
    g: &TableMachine,
    k: usize,
    n: usize,
    s: &[Sym],
) -> Result<LemmaReport, VerifyError> {
    assert!(n <= s.len(), "input shorter than n");
    let comp = gambler_to_compressor(g, k)?;
    let ell = comp.params().ell;
    let run = run_compressor(&comp, &s[..n])?;
    let out = run.output.len() as i64;
    let d = martingale_value(g, &s[..n])?;
    let sigma = g.alphabet().size();
    let c0 = g.capital();
    let ki = k as i64;

    let lhs = pow2(ki * out) * rat_pow(&d, ki);
    let rhs = pow2(2 * n as i64 + ell as i64 * ki)
        * sigma_pow(sigma, (n as i64 + ell as i64) * ki)
        * rat_pow(&c0, ki);
    let holds = lhs <= rhs;
    Ok(LemmaReport {
        lemma: "code-length",
        machine: describe_machine(g),
        params: vec![
            ("k", k.to_string()),
            ("n", n.to_string()),
            ("ell", ell.to_string()),
            ("output_bits", out.to_string()),
            ("capital", c0.to_string()),
        ],
        lhs: lhs.to_string(),
        rhs: rhs.to_string(),
        holds,
        witness: (!holds).then(|| render_word(&s[..n])),
    })
}

/// Mixes `g` toward uniform with slack `eps` and confirms the capital loss
/// on every prefix of `w` stays within `2^(-eps n)`. The sharper per-step
/// factor `(1-lambda)^n` and the mixing weight's certificate
/// `(1-lambda) >= 2^-eps` ride along as informational columns.
pub fn check_nonvanishing_bound(
    g: &TableMachine,
    eps: &BigRational,
    w: &[Sym],
) -> Result<LemmaReport, VerifyError> {
    let (mixed, lambda) = make_non_vanishing(g, eps)?;
    let before = martingale_values(g, w)?;
    let after = martingale_values(&mixed, w)?;
    let one = BigRational::one();
    let keep = &one - &lambda;

    let mut stated = true;
    let mut per_step = true;
    let mut witness = None;
    for n in 0..=w.len() {
        if before[n].is_zero() {
            // A dead branch of the source costs nothing to dominate.
            continue;
        }
        let en = eps * int_rat(n as i64);
        if cmp_rat_sigma_pow(&after[n], &before[n], 2, &-en) == Ordering::Less {
            stated = false;
            if witness.is_none() {
                witness = Some(format!("n={n} word={}", render_word(&w[..n])));
            }
        }
        if after[n] < rat_pow(&keep, n as i64) * &before[n] {
            per_step = false;
        }
    }
    let certified = cmp_rat_sigma_pow(&keep, &one, 2, &-eps.clone()) != Ordering::Less;

    let last = w.len();
    Ok(LemmaReport {
        lemma: "mix-loss",
        machine: describe_machine(g),
        params: vec![
            ("eps", eps.to_string()),
            ("n", last.to_string()),
            ("lambda", lambda.to_string()),
            ("per_step_holds", per_step.to_string()),
            ("certified", certified.to_string()),
        ],
        lhs: after[last].to_string(),
        rhs: format!("{} * 2^(-{})", before[last], eps * int_rat(last as i64)),
        holds: stated,
        witness,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeDirection {
    CompressorToGambler,
    GamblerToCompressor,
}

impl fmt::Display for ProbeDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbeDirection::CompressorToGambler => write!(f, "c2g"),
            ProbeDirection::GamblerToCompressor => write!(f, "g2c"),
        }
    }
}

/// One (s, n) grid point: the raw exact numbers plus which of the premise
/// and conclusion inequalities hold there. No aggregate pass/fail; the rows
/// are the report.
#[derive(Debug, Clone)]
pub struct TheoremProbeRow {
    pub s: BigRational,
    pub n: usize,
    pub output_bits: u64,
    pub gale: GaleValue,
    pub gale_log2: f64,
    pub premise: bool,
    pub conclusion: bool,
    /// Premise (plus the n gate) implies conclusion at this grid point.
    pub chain_holds: bool,
}

#[derive(Debug, Clone)]
pub struct TheoremProbe {
    pub direction: ProbeDirection,
    pub machine: String,
    pub k: usize,
    pub ell: usize,
    /// Slack derived from k and the machine alone.
    pub eps: BigRational,
    /// Smallest n at which the chain gate arms.
    pub n_floor: usize,
    pub mix_lambda: Option<BigRational>,
    pub rows: Vec<TheoremProbeRow>,
}

/// Sweeps one direction of the compressibility/gambling equivalence on an
/// (s, n) grid along `seq`, with every comparison exact.
///
/// Compressor direction: at grid value r, premise is the compression ratio
/// bound `2^|C(S[0:n])| <= sigma^((r+2eps)n)`, conclusion is the capital
/// floor `d(S[0:n]) * 2^kM >= sigma^((1-r-3eps)n - ell)` for the composite
/// gambler, with `eps = 2 ceil(log B) / (k+1)` chosen so the per-block
/// counting ceiling `B^ceil(n/k)` stays below `2^(eps n)` from n = k on.
///
/// Gambler direction: premise is the gale condition
/// `d(S[0:n]) * sigma^((s+2eps-1)n) >= 1` (after mixing away zero bets with
/// slack 2eps), conclusion is the output ceiling
/// `2^|C_k(S[0:n])| <= sigma^((s+4eps)n)` with `eps = 2/k`, gated from the
/// point where setup and capital overhead are absorbed.
pub fn theorem_probe(
    m: &TableMachine,
    direction: ProbeDirection,
    k: usize,
    s_grid: &[BigRational],
    seq: &[Sym],
    n_grid: &[usize],
) -> Result<TheoremProbe, VerifyError> {
    match direction {
        ProbeDirection::CompressorToGambler => probe_c2g(m, k, s_grid, seq, n_grid),
        ProbeDirection::GamblerToCompressor => probe_g2c(m, k, s_grid, seq, n_grid),
    }
}

fn probe_c2g(
    m: &TableMachine,
    k: usize,
    s_grid: &[BigRational],
    seq: &[Sym],
    n_grid: &[usize],
) -> Result<TheoremProbe, VerifyError> {
    let run = composite_gambler_run(m, k, seq)?;
    let ell = run.params().ell;
    let sigma = m.alphabet().size();
    let b = count_ceiling(m, k);
    // Smallest lam2 with B <= 2^lam2. Then for n >= k,
    // lam2 * ceil(n/k) <= 2 lam2 n / (k+1) = eps * n.
    let lam2 = (64 - (b - 1).leading_zeros() as i64).max(0);
    let eps = rat(2 * lam2, k as i64 + 1);
    let km = k as i64 * m.max_output_len() as i64;
    let one = BigRational::one();

    let mut rows = Vec::new();
    for r in s_grid {
        for &n in n_grid {
            assert!(n < run.capitals.len(), "grid point past sequence end");
            let out = run.cum_bits[n];
            let ni = int_rat(n as i64);
            let prem_exp = (r + &eps * int_rat(2)) * &ni;
            let premise =
                cmp_rat_sigma_pow(&pow2(out as i64), &one, sigma, &prem_exp) != Ordering::Greater;
            let gale = GaleValue {
                mantissa: run.capitals[n].clone(),
                sigma,
                exponent: (r + &eps * int_rat(4) - &one) * &ni,
            };
            let concl_exp = (&one - r - &eps * int_rat(3)) * &ni - int_rat(ell as i64);
            let lhs = &run.capitals[n] * pow2(km);
            let conclusion = cmp_rat_sigma_pow(&lhs, &one, sigma, &concl_exp) != Ordering::Less;
            let chain_holds = !(premise && n >= k) || conclusion;
            rows.push(TheoremProbeRow {
                s: r.clone(),
                n,
                output_bits: out,
                gale_log2: gale.log2(),
                gale,
                premise,
                conclusion,
                chain_holds,
            });
        }
    }
    Ok(TheoremProbe {
        direction: ProbeDirection::CompressorToGambler,
        machine: describe_machine(m),
        k,
        ell,
        eps,
        n_floor: k,
        mix_lambda: None,
        rows,
    })
}

fn probe_g2c(
    m: &TableMachine,
    k: usize,
    s_grid: &[BigRational],
    seq: &[Sym],
    n_grid: &[usize],
) -> Result<TheoremProbe, VerifyError> {
    if m.kind() != MachineKind::Gambler {
        return Err(VerifyError::Construct(ConstructError::NotGambler));
    }
    let eps = rat(2, k as i64);
    let has_zero_bets = (0..m.q_count())
        .any(|q| m.beta_row(QId(q as u32)).probs().iter().any(|p| p.is_zero()));
    let (driven, mix_lambda) = if has_zero_bets {
        let (g2, lam) = make_non_vanishing(m, &(&eps * int_rat(2)))?;
        (g2, Some(lam))
    } else {
        (m.clone(), None)
    };
    let comp = gambler_to_compressor(&driven, k)?;
    let ell = comp.params().ell;
    let crun = run_compressor(&comp, seq)?;
    let mut cum = Vec::with_capacity(seq.len() + 1);
    let mut acc = 0u64;
    cum.push(0);
    for step in &crun.step_outputs {
        acc += step.len() as u64;
        cum.push(acc);
    }
    let capitals = martingale_values(&driven, seq)?;
    let sigma = m.alphabet().size();
    let one = BigRational::one();

    // Setup and capital overhead are absorbed by eps*n*log(sigma) from this
    // point on; integer ceilings of both logs keep the gate conservative.
    let c0 = driven.capital();
    let lc0 = if c0 > one {
        let f = floor_log2(&c0);
        if pow2(f) == c0 {
            f
        } else {
            f + 1
        }
    } else {
        0
    };
    let n_floor = ((ell * (radix_bits(sigma) + 1) + lc0 as usize) * k).div_ceil(2);

    let mut rows = Vec::new();
    for s in s_grid {
        for &n in n_grid {
            assert!(n < capitals.len(), "grid point past sequence end");
            let out = cum[n];
            let ni = int_rat(n as i64);
            let gale = GaleValue {
                mantissa: capitals[n].clone(),
                sigma,
                exponent: (s + &eps * int_rat(2) - &one) * &ni,
            };
            let premise = gale.cmp_one() != Ordering::Less;
            let concl_exp = (s + &eps * int_rat(4)) * &ni;
            let conclusion =
                cmp_rat_sigma_pow(&pow2(out as i64), &one, sigma, &concl_exp) != Ordering::Greater;
            let chain_holds = !(premise && n >= n_floor) || conclusion;
            rows.push(TheoremProbeRow {
                s: s.clone(),
                n,
                output_bits: out,
                gale_log2: gale.log2(),
                gale,
                premise,
                conclusion,
                chain_holds,
            });
        }
    }
    Ok(TheoremProbe {
        direction: ProbeDirection::GamblerToCompressor,
        machine: describe_machine(m),
        k,
        ell,
        eps,
        n_floor,
        mix_lambda,
        rows,
    })
}

fn random_dist(rng: &mut SplitMix64, sigma: usize, positive: bool) -> RationalDist {
    loop {
        let nums: Vec<u64> = (0..sigma)
            .map(|_| if positive { 1 + rng.next_below(7) } else { rng.next_below(4) })
            .collect();
        let total: u64 = nums.iter().sum();
        if total == 0 {
            continue;
        }
        let probs = nums.iter().map(|&x| rat(x as i64, total as i64)).collect();
        return RationalDist::new(probs).expect("weights sum to one");
    }
}

/// Movement table where every trailing head skips at least one step of the
/// control cycle, so every speed stays strictly below 1. Falls back to
/// frozen trailing heads if rejection keeps drawing full-speed tables.
fn random_slow_movement(
    rng: &mut SplitMix64,
    heads: usize,
    nt: usize,
) -> (Vec<usize>, Vec<Vec<bool>>) {
    let delta_t: Vec<usize> = (0..nt).map(|_| rng.next_below(nt as u64) as usize).collect();
    if heads == 1 {
        return (delta_t, vec![vec![]; nt]);
    }
    for _ in 0..64 {
        let mu: Vec<Vec<bool>> = (0..nt)
            .map(|_| (0..heads - 1).map(|_| rng.next_below(2) == 1).collect())
            .collect();
        let mut first_seen = BTreeMap::new();
        let mut orbit = Vec::new();
        let mut t = 0usize;
        let (start, end) = loop {
            if let Some(&f) = first_seen.get(&t) {
                break (f, orbit.len());
            }
            first_seen.insert(t, orbit.len());
            orbit.push(t);
            t = delta_t[t];
        };
        let all_slow =
            (0..heads - 1).all(|i| orbit[start..end].iter().any(|&tc| !mu[tc][i]));
        if all_slow {
            return (delta_t, mu);
        }
    }
    (delta_t, vec![vec![false; heads - 1]; nt])
}

/// Compressor with arbitrary head kinematics (full speed allowed), a single
/// control state and fixed-width outputs. For exercising movement geometry.
pub fn random_movement_compressor(
    rng: &mut SplitMix64,
    sigma: usize,
    heads: usize,
    max_t: usize,
) -> TableMachine {
    let nt = 1 + rng.next_below(max_t as u64) as usize;
    let delta_t: Vec<usize> = (0..nt).map(|_| rng.next_below(nt as u64) as usize).collect();
    let mu: Vec<Vec<bool>> = (0..nt)
        .map(|_| (0..heads - 1).map(|_| rng.next_below(2) == 1).collect())
        .collect();
    let nu_row: Vec<Bits> = (0..sigma)
        .map(|a| {
            let mut b = Bits::new();
            radix_append(&mut b, Sym(a as u8), sigma);
            b
        })
        .collect();
    let spec = MachineSpec {
        kind: MachineKind::Compressor,
        alphabet: Alphabet::numeric(sigma),
        heads,
        t_names: (0..nt).map(|i| format!("t{i}")).collect(),
        q_names: vec!["q0".into()],
        initial: (0, 0),
        delta_t,
        mu,
        delta_q: vec![vec![0; sigma.pow(heads as u32)]],
        nu: Some(vec![nu_row]),
        beta: None,
        capital: None,
    };
    TableMachine::new(spec).expect("generated spec is well formed")
}

/// Rejection-samples `sigma` distinct codewords of length 1..=3 forming a
/// prefix-free set; falls back to the canonical comma code.
fn random_prefix_free_row(rng: &mut SplitMix64, sigma: usize) -> Vec<Bits> {
    assert!(sigma <= 4, "row generator covers sigma <= 4");
    'outer: for _ in 0..200 {
        let words: Vec<Bits> = (0..sigma)
            .map(|_| {
                let len = 1 + rng.next_below(3) as usize;
                let mut b = Bits::new();
                for _ in 0..len {
                    b.push(rng.next_below(2) == 1);
                }
                b
            })
            .collect();
        for i in 0..sigma {
            for j in 0..sigma {
                if i != j && words[i].is_prefix_of(&words[j]) {
                    continue 'outer;
                }
            }
        }
        return words;
    }
    ["0", "10", "110", "111"].iter().take(sigma).map(|s| Bits::from(*s)).collect()
}

/// Compressor that is lossless by construction: each control state maps
/// symbols to distinct prefix-free codewords, so the output parses back
/// symbol by symbol, and no trailing head reaches full speed.
pub fn random_il_compressor(
    rng: &mut SplitMix64,
    sigma: usize,
    heads: usize,
    max_t: usize,
    max_q: usize,
) -> TableMachine {
    let nt = 1 + rng.next_below(max_t as u64) as usize;
    let nq = 1 + rng.next_below(max_q as u64) as usize;
    let (delta_t, mu) = random_slow_movement(rng, heads, nt);
    let obs = sigma.pow(heads as u32);
    let delta_q: Vec<Vec<usize>> = (0..nq)
        .map(|_| (0..obs).map(|_| rng.next_below(nq as u64) as usize).collect())
        .collect();
    let nu: Vec<Vec<Bits>> = (0..nq).map(|_| random_prefix_free_row(rng, sigma)).collect();
    let spec = MachineSpec {
        kind: MachineKind::Compressor,
        alphabet: Alphabet::numeric(sigma),
        heads,
        t_names: (0..nt).map(|i| format!("t{i}")).collect(),
        q_names: (0..nq).map(|i| format!("q{i}")).collect(),
        initial: (0, 0),
        delta_t,
        mu,
        delta_q,
        nu: Some(nu),
        beta: None,
        capital: None,
    };
    TableMachine::new(spec).expect("generated spec is well formed")
}

/// Gambler with slow trailing heads and random rational betting rows; with
/// `non_vanishing` every bet is strictly positive.
pub fn random_gambler(
    rng: &mut SplitMix64,
    sigma: usize,
    heads: usize,
    max_t: usize,
    max_q: usize,
    non_vanishing: bool,
) -> TableMachine {
    let nt = 1 + rng.next_below(max_t as u64) as usize;
    let nq = 1 + rng.next_below(max_q as u64) as usize;
    let (delta_t, mu) = random_slow_movement(rng, heads, nt);
    let obs = sigma.pow(heads as u32);
    let delta_q: Vec<Vec<usize>> = (0..nq)
        .map(|_| (0..obs).map(|_| rng.next_below(nq as u64) as usize).collect())
        .collect();
    let beta: Vec<RationalDist> =
        (0..nq).map(|_| random_dist(rng, sigma, non_vanishing)).collect();
    let capitals = [rat(1, 1), rat(2, 1), rat(1, 2), rat(3, 1)];
    let capital = capitals[rng.next_below(4) as usize].clone();
    let spec = MachineSpec {
        kind: MachineKind::Gambler,
        alphabet: Alphabet::numeric(sigma),
        heads,
        t_names: (0..nt).map(|i| format!("t{i}")).collect(),
        q_names: (0..nq).map(|i| format!("q{i}")).collect(),
        initial: (0, 0),
        delta_t,
        mu,
        delta_q,
        nu: None,
        beta: Some(beta),
        capital: Some(capital),
    };
    TableMachine::new(spec).expect("generated spec is well formed")
}
