//! Machine descriptions, validation, and the runtime interface shared by
//! table-driven and lazily materialized machines.
//!
//! A machine is a pair of finite controls. `T` drives trailing-head movement
//! and never sees input symbols, which keeps head positions oblivious: they
//! depend only on the step count. `Q` consumes one observation vector per
//! step. Observation vectors list the trailing heads first, in head order,
//! and the leading head's symbol last.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed};

use crate::bits::Bits;

/// A symbol, identified by its index in the alphabet's declared order.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Sym(pub u8);

/// Movement-control state handle.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct TId(pub u32);

/// Symbol-control state handle. For lazy machines this is an interned index
/// that is only meaningful within the machine instance that produced it.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct QId(pub u32);

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MachineKind {
    Compressor,
    Gambler,
}

impl fmt::Display for MachineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MachineKind::Compressor => "compressor",
            MachineKind::Gambler => "gambler",
        })
    }
}

/// Finite alphabet with at least two symbols. Declared order doubles as the
/// lexicographic order used by block codes and binary symbol encodings.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Alphabet {
    labels: Vec<String>,
}

impl Alphabet {
    pub fn new(labels: Vec<String>) -> Result<Self, String> {
        if labels.len() < 2 {
            return Err(format!("alphabet needs at least 2 symbols, got {}", labels.len()));
        }
        if labels.len() > 255 {
            return Err(format!("alphabet larger than 255 symbols ({})", labels.len()));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() || l.chars().any(|c| c.is_whitespace()) || l.contains(',') {
                return Err(format!("symbol {} has unusable label {:?}", i, l));
            }
            if labels[..i].contains(l) {
                return Err(format!("duplicate symbol label {:?}", l));
            }
        }
        Ok(Alphabet { labels })
    }

    /// Alphabet `0, 1, ..., sigma-1`.
    pub fn numeric(sigma: usize) -> Self {
        Alphabet::new((0..sigma).map(|i| i.to_string()).collect()).expect("numeric alphabet")
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, s: Sym) -> &str {
        &self.labels[s.0 as usize]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<Sym> {
        self.labels.iter().position(|l| l == label).map(|i| Sym(i as u8))
    }

    pub fn syms(&self) -> impl Iterator<Item = Sym> + 'static {
        let n = self.labels.len() as u8;
        (0..n).map(Sym)
    }

    /// Packs an observation vector into a radix-`sigma` index, first component
    /// most significant. Panics on out-of-range symbols.
    pub fn pack_obs(&self, obs: &[Sym]) -> usize {
        let sigma = self.size();
        let mut key = 0usize;
        for &s in obs {
            assert!((s.0 as usize) < sigma, "symbol {} outside alphabet", s.0);
            key = key * sigma + s.0 as usize;
        }
        key
    }

    /// Inverse of `pack_obs` for vectors of length `len`.
    pub fn unpack_obs(&self, mut key: usize, len: usize) -> Vec<Sym> {
        let sigma = self.size();
        let mut out = alloc::vec![Sym(0); len];
        for i in (0..len).rev() {
            out[i] = Sym((key % sigma) as u8);
            key /= sigma;
        }
        assert_eq!(key, 0, "obs key out of range");
        out
    }
}

/// A probability distribution over the alphabet with exact rational weights.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RationalDist {
    probs: Vec<BigRational>,
}

impl RationalDist {
    pub fn new(probs: Vec<BigRational>) -> Result<Self, String> {
        if probs.iter().any(|p| p.is_negative()) {
            return Err("negative probability".to_string());
        }
        let total: BigRational = probs.iter().sum();
        if !total.is_one() {
            return Err(format!("probabilities sum to {}, not 1", total));
        }
        Ok(RationalDist { probs })
    }

    pub fn uniform(sigma: usize) -> Self {
        let p = BigRational::new(1.into(), (sigma as i64).into());
        RationalDist { probs: alloc::vec![p; sigma] }
    }

    /// Skips the sum check; for fault-injection tests only.
    pub fn new_unchecked(probs: Vec<BigRational>) -> Self {
        RationalDist { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, s: Sym) -> &BigRational {
        &self.probs[s.0 as usize]
    }

    pub fn probs(&self) -> &[BigRational] {
        &self.probs
    }

    pub fn is_nonvanishing(&self) -> bool {
        self.probs.iter().all(|p| p.is_positive())
    }
}

/// Declarative machine description. Tables are index-based; names exist for
/// files and reports. Construct one directly or parse it from the text format
/// in the companion crate, then validate into a [`TableMachine`].
#[derive(Clone, PartialEq, Debug)]
pub struct MachineSpec {
    pub kind: MachineKind,
    pub alphabet: Alphabet,
    /// Total head count `h >= 1`, including the leading head.
    pub heads: usize,
    pub t_names: Vec<String>,
    pub q_names: Vec<String>,
    /// Initial `(t, q)` as indices into the name lists.
    pub initial: (usize, usize),
    /// `delta_t[t]` is the successor movement state.
    pub delta_t: Vec<usize>,
    /// `mu[t]` holds `heads - 1` move flags, one per trailing head.
    pub mu: Vec<Vec<bool>>,
    /// `delta_q[q][packed observation vector]` is the successor symbol state.
    pub delta_q: Vec<Vec<usize>>,
    /// Compressor output table, `nu[q][symbol]`.
    pub nu: Option<Vec<Vec<Bits>>>,
    /// Gambler betting table, one distribution per `q`.
    pub beta: Option<Vec<RationalDist>>,
    /// Gambler initial capital, positive.
    pub capital: Option<BigRational>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ValidationError {
    /// Which part of the table is broken, e.g. `beta[q1]`.
    pub location: String,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

fn err(errors: &mut Vec<ValidationError>, location: impl Into<String>, message: impl Into<String>) {
    errors.push(ValidationError { location: location.into(), message: message.into() });
}

/// Checks every structural requirement on a machine table and returns the
/// list of violations, empty when the table is well formed.
pub fn validate_machine(spec: &MachineSpec) -> Vec<ValidationError> {
    let mut errors = Vec::new();
    let sigma = spec.alphabet.size();
    let h = spec.heads;
    if h < 1 {
        err(&mut errors, "heads", "head count must be at least 1");
    }
    let t_count = spec.t_names.len();
    let q_count = spec.q_names.len();
    if t_count == 0 {
        err(&mut errors, "t-states", "empty movement state set");
    }
    if q_count == 0 {
        err(&mut errors, "q-states", "empty symbol state set");
    }
    for (kind, names) in [("t-states", &spec.t_names), ("q-states", &spec.q_names)] {
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() || n.chars().any(|c| c.is_whitespace()) {
                err(&mut errors, format!("{}[{}]", kind, i), format!("unusable name {:?}", n));
            }
            if names[..i].contains(n) {
                err(&mut errors, format!("{}[{}]", kind, i), format!("duplicate name {:?}", n));
            }
        }
    }
    if spec.initial.0 >= t_count {
        err(&mut errors, "initial", format!("t index {} out of range", spec.initial.0));
    }
    if spec.initial.1 >= q_count {
        err(&mut errors, "initial", format!("q index {} out of range", spec.initial.1));
    }
    if spec.delta_t.len() != t_count {
        err(&mut errors, "delta-t", format!("{} rows for {} states", spec.delta_t.len(), t_count));
    }
    for (t, &dst) in spec.delta_t.iter().enumerate() {
        if dst >= t_count {
            err(&mut errors, format!("delta-t[{}]", t), format!("target {} out of range", dst));
        }
    }
    if spec.mu.len() != t_count {
        err(&mut errors, "mu", format!("{} rows for {} states", spec.mu.len(), t_count));
    }
    for (t, row) in spec.mu.iter().enumerate() {
        if h >= 1 && row.len() != h - 1 {
            err(
                &mut errors,
                format!("mu[{}]", t),
                format!("{} move flags for {} trailing heads", row.len(), h - 1),
            );
        }
    }
    let obs_space = sigma.checked_pow(h as u32);
    if spec.delta_q.len() != q_count {
        err(&mut errors, "delta-q", format!("{} rows for {} states", spec.delta_q.len(), q_count));
    }
    if let Some(obs_space) = obs_space {
        for (q, row) in spec.delta_q.iter().enumerate() {
            if row.len() != obs_space {
                err(
                    &mut errors,
                    format!("delta-q[{}]", q),
                    format!("{} entries for {} observation vectors", row.len(), obs_space),
                );
            }
            for (key, &dst) in row.iter().enumerate() {
                if dst >= q_count {
                    err(
                        &mut errors,
                        format!("delta-q[{}][{}]", q, key),
                        format!("target {} out of range", dst),
                    );
                }
            }
        }
    } else {
        err(&mut errors, "delta-q", "observation space overflows usize");
    }
    match spec.kind {
        MachineKind::Compressor => {
            match &spec.nu {
                None => err(&mut errors, "nu", "compressor without output table"),
                Some(nu) => {
                    if nu.len() != q_count {
                        err(&mut errors, "nu", format!("{} rows for {} states", nu.len(), q_count));
                    }
                    for (q, row) in nu.iter().enumerate() {
                        if row.len() != sigma {
                            err(
                                &mut errors,
                                format!("nu[{}]", q),
                                format!("{} entries for {} symbols", row.len(), sigma),
                            );
                        }
                    }
                }
            }
            if spec.beta.is_some() {
                err(&mut errors, "beta", "compressor with betting table");
            }
            if spec.capital.is_some() {
                err(&mut errors, "capital", "compressor with initial capital");
            }
        }
        MachineKind::Gambler => {
            match &spec.beta {
                None => err(&mut errors, "beta", "gambler without betting table"),
                Some(beta) => {
                    if beta.len() != q_count {
                        err(&mut errors, "beta", format!("{} rows for {} states", beta.len(), q_count));
                    }
                    for (q, dist) in beta.iter().enumerate() {
                        if dist.len() != sigma {
                            err(
                                &mut errors,
                                format!("beta[{}]", q),
                                format!("{} probabilities for {} symbols", dist.len(), sigma),
                            );
                        }
                        if dist.probs().iter().any(|p| p.is_negative()) {
                            err(&mut errors, format!("beta[{}]", q), "negative probability");
                        }
                        let total: BigRational = dist.probs().iter().sum();
                        if !total.is_one() {
                            err(&mut errors, format!("beta[{}]", q), format!("row sums to {}", total));
                        }
                    }
                }
            }
            match &spec.capital {
                None => err(&mut errors, "capital", "gambler without initial capital"),
                Some(c) => {
                    if !c.is_positive() {
                        err(&mut errors, "capital", format!("must be positive, got {}", c));
                    }
                }
            }
            if spec.nu.is_some() {
                err(&mut errors, "nu", "gambler with output table");
            }
        }
    }
    errors
}

/// A validated machine with dense transition tables.
#[derive(Clone, Debug)]
pub struct TableMachine {
    spec: MachineSpec,
}

impl TableMachine {
    pub fn new(spec: MachineSpec) -> Result<Self, Vec<ValidationError>> {
        let errors = validate_machine(&spec);
        if errors.is_empty() {
            Ok(TableMachine { spec })
        } else {
            Err(errors)
        }
    }

    /// Wraps a spec without validating it. Exists so tests can inject
    /// deliberately broken machines past the public constructor; everything
    /// downstream assumes table shapes are consistent and may panic if not.
    pub fn new_unchecked(spec: MachineSpec) -> Self {
        TableMachine { spec }
    }

    pub fn spec(&self) -> &MachineSpec {
        &self.spec
    }

    pub fn q_count(&self) -> usize {
        self.spec.q_names.len()
    }

    pub fn beta_row(&self, q: QId) -> &RationalDist {
        &self.spec.beta.as_ref().expect("gambler machine")[q.0 as usize]
    }

    pub fn nu_row(&self, q: QId) -> &[Bits] {
        &self.spec.nu.as_ref().expect("compressor machine")[q.0 as usize]
    }

    pub fn nu_len(&self, q: QId, a: Sym) -> u64 {
        self.nu_row(q)[a.0 as usize].len() as u64
    }

    /// Longest single-step output over all states and symbols; 0 for an
    /// all-empty table.
    pub fn max_output_len(&self) -> u64 {
        self.spec
            .nu
            .as_ref()
            .expect("compressor machine")
            .iter()
            .flat_map(|row| row.iter().map(|b| b.len() as u64))
            .max()
            .unwrap_or(0)
    }
}

/// Runtime interface over both dense and lazily materialized machines.
///
/// State handles are only meaningful within the instance that issued them.
/// Implementations may memoize internally behind `&self`.
pub trait Fsm {
    fn kind(&self) -> MachineKind;
    fn alphabet(&self) -> &Alphabet;
    /// Total head count including the leading head.
    fn heads(&self) -> usize;
    fn t_count(&self) -> usize;
    fn initial_state(&self) -> (TId, QId);
    fn next_t(&self, t: TId) -> TId;
    /// Move flags for the trailing heads, length `heads() - 1`.
    fn movement(&self, t: TId) -> &[bool];
    /// Observation order: trailing heads first, leading symbol last.
    fn next_q(&self, q: QId, obs: &[Sym]) -> QId;
    /// Compressor step output. Panics on gamblers.
    fn output(&self, q: QId, a: Sym) -> Bits;
    /// Gambler betting row indexed by symbol. Panics on compressors.
    fn bets(&self, q: QId) -> Vec<BigRational>;
    /// Gambler initial capital. Panics on compressors.
    fn capital(&self) -> BigRational;
    fn describe_t(&self, t: TId) -> String;
    fn describe_q(&self, q: QId) -> String;
}

impl Fsm for TableMachine {
    fn kind(&self) -> MachineKind {
        self.spec.kind
    }

    fn alphabet(&self) -> &Alphabet {
        &self.spec.alphabet
    }

    fn heads(&self) -> usize {
        self.spec.heads
    }

    fn t_count(&self) -> usize {
        self.spec.t_names.len()
    }

    fn initial_state(&self) -> (TId, QId) {
        (TId(self.spec.initial.0 as u32), QId(self.spec.initial.1 as u32))
    }

    fn next_t(&self, t: TId) -> TId {
        TId(self.spec.delta_t[t.0 as usize] as u32)
    }

    fn movement(&self, t: TId) -> &[bool] {
        &self.spec.mu[t.0 as usize]
    }

    fn next_q(&self, q: QId, obs: &[Sym]) -> QId {
        debug_assert_eq!(obs.len(), self.spec.heads);
        let key = self.spec.alphabet.pack_obs(obs);
        QId(self.spec.delta_q[q.0 as usize][key] as u32)
    }

    fn output(&self, q: QId, a: Sym) -> Bits {
        self.nu_row(q)[a.0 as usize].clone()
    }

    fn bets(&self, q: QId) -> Vec<BigRational> {
        self.beta_row(q).probs().to_vec()
    }

    fn capital(&self) -> BigRational {
        self.spec.capital.clone().expect("gambler machine")
    }

    fn describe_t(&self, t: TId) -> String {
        self.spec.t_names[t.0 as usize].clone()
    }

    fn describe_q(&self, q: QId) -> String {
        self.spec.q_names[q.0 as usize].clone()
    }
}
