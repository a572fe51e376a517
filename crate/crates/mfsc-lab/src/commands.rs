//! Implementations of the five `mfsc` subcommands. The binary only parses
//! flags, merges them with an optional config file and dispatches here;
//! everything observable (stdout, files, exit codes) is produced by these
//! functions so the behavior is testable end to end.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use mfsc_core::construct::{
    compressor_to_gambler, fold_full_speed_heads, gambler_to_compressor, make_non_vanishing,
    setup_params, ConstructError, LazyCompressor, LazyGambler,
};
use mfsc_core::gale::check_gale_identity;
use mfsc_core::machine::QId;
use mfsc_core::seq::{generate, SequenceSpec, SplitMix64};
use mfsc_core::sim::{run_compressor, run_gambler_trace, speed_profile};
use mfsc_core::verify::{
    check_block_bound_on, check_compressor_bound, check_divisible_bound_on,
    check_general_bound_on, check_information_lossless, check_nonvanishing_bound,
    check_speed_bound, check_suffix_equality_on, composite_gambler_run, describe_machine,
    random_gambler, random_il_compressor, random_movement_compressor, theorem_probe, LemmaReport,
    ProbeDirection, VerifyError,
};
use mfsc_core::{Alphabet, Fsm, MachineKind, Sym, TableMachine};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::format::{label_vector, parse_machine, rational_from_str, render_machine};
use crate::report::{self, RatioRow};
use crate::{LabError, EXIT_OK, EXIT_VERIFY_FAILED};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Direction {
    C2g,
    G2c,
}

impl Direction {
    pub fn parse(s: &str) -> Result<Direction, LabError> {
        match s {
            "c2g" => Ok(Direction::C2g),
            "g2c" => Ok(Direction::G2c),
            other => Err(LabError::usage(format!("direction must be c2g or g2c, found {other:?}"))),
        }
    }

    fn core(self) -> ProbeDirection {
        match self {
            Direction::C2g => ProbeDirection::CompressorToGambler,
            Direction::G2c => ProbeDirection::GamblerToCompressor,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::C2g => "c2g",
            Direction::G2c => "g2c",
        })
    }
}

// --- files ---------------------------------------------------------------

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

pub fn read_file(path: &Path) -> Result<String, LabError> {
    fs::read_to_string(path).map_err(|source| LabError::Io { path: path_str(path), source })
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), LabError> {
    fs::write(path, bytes).map_err(|source| LabError::Io { path: path_str(path), source })
}

pub fn load_machine(path: &Path) -> Result<TableMachine, LabError> {
    let text = read_file(path)?;
    let spec = parse_machine(&text)
        .map_err(|source| LabError::File { path: path_str(path), source })?;
    TableMachine::new(spec).map_err(|errors| LabError::Machine {
        path: path_str(path),
        summary: errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "),
    })
}

// --- shared argument parsing ----------------------------------------------

/// `family:arg` sequence spec as written on the CLI or in a config file.
pub fn parse_seq_spec(raw: &str, alphabet: &Alphabet) -> Result<SequenceSpec, LabError> {
    let Some((family, arg)) = raw.split_once(':') else {
        return Err(LabError::usage(format!(
            "sequence spec {raw:?} needs `family:arg`, e.g. periodic:01, champernowne:2, debruijn:4, iid:42"
        )));
    };
    match family {
        "periodic" => {
            let pattern: Vec<Sym> = arg
                .chars()
                .map(|c| {
                    alphabet.index_of(&c.to_string()).ok_or_else(|| {
                        LabError::usage(format!(
                            "pattern symbol {c:?} is not in the alphabet {}",
                            alphabet.labels().join(",")
                        ))
                    })
                })
                .collect::<Result<_, _>>()?;
            if pattern.is_empty() {
                return Err(LabError::usage("periodic pattern is empty"));
            }
            Ok(SequenceSpec::Periodic { pattern })
        }
        "champernowne" => {
            let base: usize = arg
                .parse()
                .map_err(|_| LabError::usage(format!("bad champernowne base {arg:?}")))?;
            Ok(SequenceSpec::Champernowne { base })
        }
        "debruijn" => {
            let order: u32 =
                arg.parse().map_err(|_| LabError::usage(format!("bad debruijn order {arg:?}")))?;
            Ok(SequenceSpec::DeBruijn { order })
        }
        "iid" => {
            let seed: u64 =
                arg.parse().map_err(|_| LabError::usage(format!("bad iid seed {arg:?}")))?;
            Ok(SequenceSpec::Iid { seed, dist: None })
        }
        other => Err(LabError::usage(format!(
            "unknown sequence family {other:?}; use periodic, champernowne, debruijn or iid"
        ))),
    }
}

pub fn generate_input(
    raw: &str,
    alphabet: &Alphabet,
    n: usize,
) -> Result<Vec<Sym>, LabError> {
    let spec = parse_seq_spec(raw, alphabet)?;
    generate(&spec, alphabet.size(), n).map_err(|e| LabError::usage(e.to_string()))
}

fn parse_usize_list(raw: &str, what: &str) -> Result<Vec<usize>, LabError> {
    let grid: Vec<usize> = raw
        .split(',')
        .map(|f| {
            f.trim()
                .parse::<usize>()
                .map_err(|_| LabError::usage(format!("{what}: bad entry {f:?}")))
        })
        .collect::<Result<_, _>>()?;
    if grid.is_empty() || grid[0] == 0 {
        return Err(LabError::usage(format!("{what}: entries must be positive")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LabError::usage(format!("{what}: entries must be strictly increasing")));
    }
    Ok(grid)
}

pub fn parse_n_grid(raw: &str) -> Result<Vec<usize>, LabError> {
    parse_usize_list(raw, "n-grid")
}

pub fn parse_k_grid(raw: &str) -> Result<Vec<usize>, LabError> {
    parse_usize_list(raw, "k-grid")
}

pub fn parse_s_grid(raw: &str) -> Result<Vec<BigRational>, LabError> {
    let grid: Vec<BigRational> = raw
        .split(',')
        .map(|f| {
            rational_from_str(f.trim()).map_err(|e| LabError::usage(format!("s-grid: {e}")))
        })
        .collect::<Result<_, _>>()?;
    if grid.is_empty() || !grid[0].is_positive() {
        return Err(LabError::usage("s-grid: entries must be positive"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LabError::usage("s-grid: entries must be strictly increasing"));
    }
    Ok(grid)
}

pub fn parse_eps(raw: &str) -> Result<BigRational, LabError> {
    let eps = rational_from_str(raw).map_err(|e| LabError::usage(format!("eps: {e}")))?;
    if !eps.is_positive() {
        return Err(LabError::usage("eps must be positive"));
    }
    Ok(eps)
}

// --- construction plumbing -------------------------------------------------

fn construct_err(e: ConstructError) -> LabError {
    match e {
        ConstructError::Budget { .. } => LabError::Budget(e.to_string()),
        _ => LabError::Usage(e.to_string()),
    }
}

fn verify_err(e: VerifyError) -> LabError {
    match e {
        VerifyError::Budget { .. } => LabError::Budget(e.to_string()),
        VerifyError::Construct(inner) => construct_err(inner),
        VerifyError::Sim(_) => LabError::Usage(e.to_string()),
    }
}

fn has_zero_bet(g: &TableMachine) -> bool {
    (0..g.q_count()).any(|q| g.beta_row(QId(q as u32)).probs().iter().any(|p| p.is_zero()))
}

/// Adjusts a source machine so the requested construction is applicable:
/// folds full-speed trailing heads away before `c2g`, mixes zero bets toward
/// uniform before `g2c` (which needs `eps`). Returns the machine the
/// construction starts from plus one note per adjustment made.
pub fn prepare_source(
    src: &TableMachine,
    dir: Direction,
    eps: Option<&BigRational>,
) -> Result<(TableMachine, Vec<String>), LabError> {
    let mut notes = Vec::new();
    match dir {
        Direction::C2g => {
            if src.kind() != MachineKind::Compressor {
                return Err(LabError::usage("c2g starts from a compressor"));
            }
            if speed_profile(src).alphas.iter().any(|a| a.is_one()) {
                let folded = fold_full_speed_heads(src).map_err(construct_err)?;
                notes.push(format!(
                    "folded {} full-speed trailing head(s) into the symbol states; {} head(s) remain",
                    src.heads() - folded.heads(),
                    folded.heads()
                ));
                Ok((folded, notes))
            } else {
                Ok((src.clone(), notes))
            }
        }
        Direction::G2c => {
            if src.kind() != MachineKind::Gambler {
                return Err(LabError::usage("g2c starts from a gambler"));
            }
            match (has_zero_bet(src), eps) {
                (false, None) => Ok((src.clone(), notes)),
                (_, Some(eps)) => {
                    let (mixed, lambda) = make_non_vanishing(src, eps).map_err(construct_err)?;
                    notes.push(format!(
                        "mixed bets toward uniform with lambda = {lambda} (eps = {eps})"
                    ));
                    Ok((mixed, notes))
                }
                (true, None) => Err(LabError::usage(
                    "gambler bets 0 on some symbol, so no block code exists as is; pass --eps p/q to mix the bets toward uniform first",
                )),
            }
        }
    }
}

/// A machine ready to drive: the source itself or a lazily constructed
/// counterpart borrowing it.
pub enum Built<'a> {
    Plain(&'a TableMachine),
    Gambler(LazyGambler<'a>),
    Compressor(LazyCompressor<'a>),
}

impl<'a> Built<'a> {
    pub fn fsm(&self) -> &(dyn Fsm + 'a) {
        match self {
            Built::Plain(m) => *m,
            Built::Gambler(g) => g,
            Built::Compressor(c) => c,
        }
    }

    fn describe(&self) -> String {
        match self {
            Built::Plain(m) => describe_machine(m),
            Built::Gambler(g) => format!(
                "gambler constructed with k={} from {}",
                g.params().k,
                describe_machine(g.source())
            ),
            Built::Compressor(c) => format!(
                "block compressor constructed with k={} from {}",
                c.params().k,
                describe_machine(c.source())
            ),
        }
    }
}

pub fn construct_machine<'a>(
    base: &'a TableMachine,
    dir: Direction,
    k: usize,
) -> Result<Built<'a>, LabError> {
    if k == 0 {
        return Err(LabError::usage("k must be positive"));
    }
    match dir {
        Direction::C2g => {
            Ok(Built::Gambler(compressor_to_gambler(base, k).map_err(construct_err)?))
        }
        Direction::G2c => {
            Ok(Built::Compressor(gambler_to_compressor(base, k).map_err(construct_err)?))
        }
    }
}

// --- simulate ----------------------------------------------------------------

pub struct SimulateOpts {
    pub machine: PathBuf,
    pub seq: String,
    pub n: usize,
    pub construct: Option<Direction>,
    pub k: Option<usize>,
    pub eps: Option<BigRational>,
    pub out: PathBuf,
}

pub fn cmd_simulate(o: &SimulateOpts) -> Result<i32, LabError> {
    let src = load_machine(&o.machine)?;
    let w = generate_input(&o.seq, src.alphabet(), o.n)?;
    fs::create_dir_all(&o.out)
        .map_err(|source| LabError::Io { path: path_str(&o.out), source })?;

    let prepared: TableMachine;
    let built: Built = match o.construct {
        None => Built::Plain(&src),
        Some(dir) => {
            let k = o.k.ok_or_else(|| LabError::usage("--construct needs --k"))?;
            let (base, notes) = prepare_source(&src, dir, o.eps.as_ref())?;
            for note in &notes {
                println!("note: {note}");
            }
            prepared = base;
            construct_machine(&prepared, dir, k)?
        }
    };
    let m = built.fsm();
    println!("machine: {}", built.describe());

    let trace_path = o.out.join("trace.csv");
    match m.kind() {
        MachineKind::Compressor => {
            let run = run_compressor(m, &w).map_err(|e| LabError::usage(e.to_string()))?;
            write_file(&trace_path, report::compressor_trace_csv(m, &run).as_bytes())?;
            let bits_path = o.out.join("output.bits");
            write_file(&bits_path, run.output.to_string().as_bytes())?;
            let packed_path = o.out.join("output.packed");
            write_file(&packed_path, &run.output.as_bytes_be())?;
            println!("steps: {}", w.len());
            println!("output bits: {}", run.output.len());
            println!(
                "wrote {} {} {}",
                trace_path.display(),
                bits_path.display(),
                packed_path.display()
            );
        }
        MachineKind::Gambler => {
            let run = run_gambler_trace(m, &w).map_err(|e| LabError::usage(e.to_string()))?;
            write_file(&trace_path, report::gambler_trace_csv(m, &run).as_bytes())?;
            println!("steps: {}", w.len());
            println!("final capital: {}", run.capitals.last().unwrap());
            println!("wrote {}", trace_path.display());
        }
    }
    Ok(EXIT_OK)
}

// --- construct -----------------------------------------------------------------

pub struct ConstructOpts {
    pub machine: PathBuf,
    pub direction: Direction,
    pub k: usize,
    pub eps: Option<BigRational>,
    pub horizon: usize,
    pub budget: usize,
    pub export: Option<PathBuf>,
}

pub fn cmd_construct(o: &ConstructOpts) -> Result<i32, LabError> {
    let src = load_machine(&o.machine)?;
    let (base, notes) = prepare_source(&src, o.direction, o.eps.as_ref())?;
    for note in &notes {
        println!("note: {note}");
    }
    let built = construct_machine(&base, o.direction, o.k)?;

    let (params, closure) = match &built {
        Built::Gambler(g) => (g.params().clone(), g.reachable_closure(Some(o.horizon), o.budget)),
        Built::Compressor(c) => {
            (c.params().clone(), c.reachable_closure(Some(o.horizon), o.budget))
        }
        Built::Plain(_) => unreachable!("construct always builds"),
    };
    match o.direction {
        Direction::C2g => println!(
            "direction {} k={}: n0={} ell={} M={}",
            o.direction,
            params.k,
            params.n0,
            params.ell,
            base.max_output_len()
        ),
        Direction::G2c => {
            println!("direction {} k={}: n0={} ell={}", o.direction, params.k, params.n0, params.ell)
        }
    }
    let (count, closed) = closure.map_err(construct_err)?;
    println!(
        "reachable states within depth {}: {}{}",
        o.horizon,
        count,
        if closed { " (closed)" } else { " (frontier still open)" }
    );

    match &o.export {
        Some(path) => {
            let table = match &built {
                Built::Gambler(g) => g.materialize(o.budget),
                Built::Compressor(c) => c.materialize(o.budget),
                Built::Plain(_) => unreachable!(),
            }
            .map_err(construct_err)?;
            write_file(path, render_machine(table.spec()).as_bytes())?;
            println!("exported {} states to {}", table.q_count(), path.display());
        }
        None => println!(
            "drive it in-process by passing --construct {} --k {} to simulate, ratio or dim-probe; --export FILE saves the reachable fragment",
            o.direction, o.k
        ),
    }
    Ok(EXIT_OK)
}

// --- ratio -----------------------------------------------------------------

pub struct RatioOpts {
    pub machine: PathBuf,
    pub construct: Option<Direction>,
    pub k: Option<usize>,
    pub eps: Option<BigRational>,
    pub seq: String,
    pub n_grid: Vec<usize>,
    pub out: Option<PathBuf>,
}

pub fn cmd_ratio(o: &RatioOpts) -> Result<i32, LabError> {
    let src = load_machine(&o.machine)?;
    let prepared: TableMachine;
    let built: Built = match o.construct {
        None => Built::Plain(&src),
        Some(dir) => {
            let k = o.k.ok_or_else(|| LabError::usage("--construct needs --k"))?;
            let (base, notes) = prepare_source(&src, dir, o.eps.as_ref())?;
            for note in &notes {
                println!("note: {note}");
            }
            prepared = base;
            construct_machine(&prepared, dir, k)?
        }
    };
    let m = built.fsm();
    if m.kind() != MachineKind::Compressor {
        return Err(LabError::usage(
            "ratio needs a compressor; for a gambler file construct one with --construct g2c --k K",
        ));
    }

    let max_n = *o.n_grid.last().unwrap();
    let w = generate_input(&o.seq, m.alphabet(), max_n)?;
    let run = run_compressor(m, &w).map_err(|e| LabError::usage(e.to_string()))?;
    let mut cumulative = vec![0u64; w.len() + 1];
    for (i, step) in run.step_outputs.iter().enumerate() {
        cumulative[i + 1] = cumulative[i] + step.len() as u64;
    }
    let log_sigma = (m.alphabet().size() as f64).log2();
    let rows: Vec<RatioRow> = o
        .n_grid
        .iter()
        .map(|&n| RatioRow {
            n,
            output_bits: cumulative[n],
            ratio: cumulative[n] as f64 / (n as f64 * log_sigma),
        })
        .collect();
    let csv = report::ratio_csv(&rows);
    match &o.out {
        Some(path) => {
            write_file(path, csv.as_bytes())?;
            println!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => print!("{csv}"),
    }
    Ok(EXIT_OK)
}

// --- verify -----------------------------------------------------------------

pub struct VerifyOpts {
    pub suite: String,
    pub machines: Vec<PathBuf>,
    pub seed: u64,
    pub k: Option<usize>,
    pub max_len: Option<usize>,
    pub depth: Option<usize>,
    pub out: Option<PathBuf>,
}

pub const SUITES: &[&str] = &[
    "gale-identity",
    "speed",
    "il",
    "suffix-ratio",
    "block-bounds",
    "lemma-4-all",
    "code-length",
    "mix-loss",
    "all",
];

fn render_syms(alphabet: &Alphabet, w: &[Sym]) -> String {
    label_vector(alphabet, w)
}

fn identity_report(m: &TableMachine, depth: usize) -> Result<LemmaReport, LabError> {
    let cex = check_gale_identity(m, depth).map_err(|e| LabError::usage(e.to_string()))?;
    Ok(LemmaReport {
        lemma: "gale-identity",
        machine: describe_machine(m),
        params: vec![("depth", depth.to_string())],
        lhs: "d(w)".into(),
        rhs: "mean of child capitals".into(),
        holds: cex.is_none(),
        witness: cex.map(|c| {
            format!("w={} d(w)={} mean={}", render_syms(m.alphabet(), &c.w), c.lhs, c.rhs)
        }),
    })
}

fn speed_report(m: &TableMachine, n_max: u64) -> LemmaReport {
    let v = check_speed_bound(m, n_max);
    LemmaReport {
        lemma: "speed-bound",
        machine: describe_machine(m),
        params: vec![("n_max", n_max.to_string()), ("slack", m.t_count().to_string())],
        lhs: "max |pi_i(n) - alpha_i n|".into(),
        rhs: "|T|".into(),
        holds: v.is_none(),
        witness: v.map(|v| {
            format!(
                "head {} at n={} sits at {} (deviation {} past slack {})",
                v.head, v.n, v.position, v.deviation, v.slack
            )
        }),
    }
}

fn il_report(m: &TableMachine, max_len: usize) -> Result<LemmaReport, LabError> {
    let collision = check_information_lossless(m, max_len).map_err(verify_err)?;
    Ok(LemmaReport {
        lemma: "information-lossless",
        machine: describe_machine(m),
        params: vec![("max_len", max_len.to_string())],
        lhs: "(C(w), final state)".into(),
        rhs: "distinct for distinct w".into(),
        holds: collision.is_none(),
        witness: collision.map(|c| {
            format!(
                "{} and {} share output {} and final state",
                render_syms(m.alphabet(), &c.first),
                render_syms(m.alphabet(), &c.second),
                mfsc_core::bits::display_or_dash(&c.output)
            )
        }),
    })
}

fn random_word(rng: &mut SplitMix64, sigma: usize, len: usize) -> Vec<Sym> {
    (0..len).map(|_| Sym(rng.next_below(sigma as u64) as u8)).collect()
}

/// Machines a suite runs over: the provided ones of the right kind, or a
/// seeded default family. `strict` errors when files were provided but none
/// has the right kind (individual suites); the `all` suite passes false and
/// falls back to defaults instead.
fn pick_machines(
    provided: &[TableMachine],
    kind: MachineKind,
    strict: bool,
    suite: &str,
    default: impl FnOnce() -> Vec<TableMachine>,
) -> Result<Vec<TableMachine>, LabError> {
    if provided.is_empty() {
        return Ok(default());
    }
    let picked: Vec<TableMachine> =
        provided.iter().filter(|m| m.kind() == kind).cloned().collect();
    if picked.is_empty() {
        if strict {
            return Err(LabError::usage(format!("suite {suite} needs {kind} machines")));
        }
        return Ok(default());
    }
    Ok(picked)
}

fn default_gamblers(seed: u64, count: usize, non_vanishing: bool) -> Vec<TableMachine> {
    let mut rng = SplitMix64::new(seed ^ 0x47414d42);
    (0..count)
        .map(|i| {
            let sigma = if i % 3 == 2 { 3 } else { 2 };
            random_gambler(&mut rng, sigma, 1 + i % 3, 3, 3, non_vanishing)
        })
        .collect()
}

fn default_il_compressors(seed: u64, count: usize) -> Vec<TableMachine> {
    let mut rng = SplitMix64::new(seed ^ 0x494c4331);
    (0..count).map(|i| random_il_compressor(&mut rng, 2, 1 + i % 2, 3, 3)).collect()
}

fn default_movement_machines(seed: u64, count: usize) -> Vec<TableMachine> {
    let mut rng = SplitMix64::new(seed ^ 0x4d4f5645);
    (0..count).map(|i| random_movement_compressor(&mut rng, 2, 1 + i % 3, 4)).collect()
}

struct SuiteCtx<'a> {
    provided: &'a [TableMachine],
    seed: u64,
    k_override: Option<usize>,
    max_len: usize,
    depth: usize,
    strict: bool,
}

impl SuiteCtx<'_> {
    fn ks(&self) -> Vec<usize> {
        self.k_override.map_or_else(|| vec![1, 2], |k| vec![k])
    }
}

fn suite_gale_identity(ctx: &SuiteCtx<'_>) -> Result<Vec<LemmaReport>, LabError> {
    let machines = pick_machines(ctx.provided, MachineKind::Gambler, ctx.strict, "gale-identity", || {
        default_gamblers(ctx.seed, 12, false)
    })?;
    machines.iter().map(|m| identity_report(m, ctx.depth)).collect()
}

fn suite_speed(ctx: &SuiteCtx<'_>) -> Result<Vec<LemmaReport>, LabError> {
    if ctx.provided.is_empty() {
        return Ok(default_movement_machines(ctx.seed, 20)
            .iter()
            .map(|m| speed_report(m, 2000))
            .collect());
    }
    Ok(ctx.provided.iter().map(|m| speed_report(m, 2000)).collect())
}

fn suite_il(ctx: &SuiteCtx<'_>) -> Result<Vec<LemmaReport>, LabError> {
    let machines = pick_machines(ctx.provided, MachineKind::Compressor, ctx.strict, "il", || {
        default_il_compressors(ctx.seed, 10)
    })?;
    machines.iter().map(|m| il_report(m, ctx.max_len)).collect()
}

/// Exercises the capital algebra of constructed gamblers on a random input:
/// the suffix-ratio equality at every block boundary and offset.
fn suite_suffix_ratio(ctx: &SuiteCtx<'_>) -> Result<Vec<LemmaReport>, LabError> {
    let machines = pick_machines(ctx.provided, MachineKind::Compressor, ctx.strict, "suffix-ratio", || {
        default_il_compressors(ctx.seed, 6)
    })?;
    let mut rng = SplitMix64::new(ctx.seed ^ 0x53554646);
    let mut reports = Vec::new();
    for m in &machines {
        for &k in &ctx.ks() {
            let params = setup_params(m, k).map_err(construct_err)?;
            let len = params.ell + 3 * k;
            let w = random_word(&mut rng, m.alphabet().size(), len);
            let run = composite_gambler_run(m, k, &w).map_err(verify_err)?;
            for m_blocks in params.ell / k..=len / k {
                for j in 0..=k {
                    if m_blocks * k + j <= len {
                        reports.push(check_suffix_equality_on(m, &run, m_blocks, j));
                    }
                }
            }
        }
    }
    Ok(reports)
}

/// Block-boundary floors (exact product form, uniform counting form) plus
/// the any-n floor, on the same runs as the suffix-ratio suite.
fn suite_block_bounds(ctx: &SuiteCtx<'_>) -> Result<Vec<LemmaReport>, LabError> {
    let machines = pick_machines(ctx.provided, MachineKind::Compressor, ctx.strict, "block-bounds", || {
        default_il_compressors(ctx.seed, 6)
    })?;
    let mut rng = SplitMix64::new(ctx.seed ^ 0x424c4f43);
    let mut reports = Vec::new();
    for m in &machines {
        for &k in &ctx.ks() {
            let params = setup_params(m, k).map_err(construct_err)?;
            let len = params.ell + 3 * k;
            let w = random_word(&mut rng, m.alphabet().size(), len);
            let run = composite_gambler_run(m, k, &w).map_err(verify_err)?;
            for m_blocks in params.ell / k..=len / k {
                reports.push(check_block_bound_on(&run, m_blocks));
                reports.push(check_divisible_bound_on(&run, m_blocks));
            }
            for n in 0..=len {
                reports.push(check_general_bound_on(&run, n));
            }
        }
    }
    Ok(reports)
}

fn suite_code_length(ctx: &SuiteCtx<'_>) -> Result<Vec<LemmaReport>, LabError> {
    let machines = pick_machines(ctx.provided, MachineKind::Gambler, ctx.strict, "code-length", || {
        default_gamblers(ctx.seed, 6, true)
    })?;
    let mut rng = SplitMix64::new(ctx.seed ^ 0x434f4445);
    let mut reports = Vec::new();
    for g in &machines {
        if has_zero_bet(g) {
            return Err(LabError::usage(
                "suite code-length needs non-vanishing gamblers; mix zero bets away first (construct --eps)",
            ));
        }
        for &k in &ctx.ks() {
            let params = setup_params(g, k).map_err(construct_err)?;
            let n = params.ell + 12;
            let w = random_word(&mut rng, g.alphabet().size(), n);
            reports.push(check_compressor_bound(g, k, n, &w).map_err(verify_err)?);
        }
    }
    Ok(reports)
}

fn suite_mix_loss(ctx: &SuiteCtx<'_>) -> Result<Vec<LemmaReport>, LabError> {
    let machines = pick_machines(ctx.provided, MachineKind::Gambler, ctx.strict, "mix-loss", || {
        default_gamblers(ctx.seed, 8, false)
    })?;
    let mut rng = SplitMix64::new(ctx.seed ^ 0x4d495845);
    let mut reports = Vec::new();
    for g in &machines {
        let w = random_word(&mut rng, g.alphabet().size(), 8);
        for eps in [rational_from_str("1").unwrap(), rational_from_str("1/2").unwrap(), rational_from_str("1/4").unwrap()]
        {
            reports.push(check_nonvanishing_bound(g, &eps, &w).map_err(verify_err)?);
        }
    }
    Ok(reports)
}

fn run_suite(ctx: &SuiteCtx<'_>, suite: &str) -> Result<Vec<LemmaReport>, LabError> {
    match suite {
        "gale-identity" => suite_gale_identity(ctx),
        "speed" => suite_speed(ctx),
        "il" => suite_il(ctx),
        "suffix-ratio" => suite_suffix_ratio(ctx),
        "block-bounds" => suite_block_bounds(ctx),
        "lemma-4-all" => {
            let mut reports = suite_suffix_ratio(ctx)?;
            reports.extend(suite_block_bounds(ctx)?);
            Ok(reports)
        }
        "code-length" => suite_code_length(ctx),
        "mix-loss" => suite_mix_loss(ctx),
        "all" => {
            let loose = SuiteCtx { strict: false, ..*ctx };
            let mut reports = Vec::new();
            for s in SUITES.iter().filter(|s| **s != "all" && **s != "lemma-4-all") {
                reports.extend(run_suite(&loose, s)?);
            }
            Ok(reports)
        }
        other => Err(LabError::usage(format!(
            "unknown suite {other:?}; available: {}",
            SUITES.join(", ")
        ))),
    }
}

pub fn cmd_verify(o: &VerifyOpts) -> Result<i32, LabError> {
    let provided: Vec<TableMachine> =
        o.machines.iter().map(|p| load_machine(p)).collect::<Result<_, _>>()?;
    let ctx = SuiteCtx {
        provided: &provided,
        seed: o.seed,
        k_override: o.k,
        max_len: o.max_len.unwrap_or(6),
        depth: o.depth.unwrap_or(5),
        strict: true,
    };
    let reports = run_suite(&ctx, &o.suite)?;
    for r in &reports {
        println!("{r}");
    }
    let passes = reports.iter().filter(|r| r.holds).count();
    println!("suite {}: {}/{} hold", o.suite, passes, reports.len());
    if let Some(dir) = &o.out {
        fs::create_dir_all(dir).map_err(|source| LabError::Io { path: path_str(dir), source })?;
        let jsonl = dir.join(format!("{}.jsonl", o.suite));
        write_file(&jsonl, report::lemma_jsonl(&reports).as_bytes())?;
        let csv = dir.join(format!("{}-summary.csv", o.suite));
        write_file(&csv, report::lemma_summary_csv(&reports).as_bytes())?;
        println!("wrote {} {}", jsonl.display(), csv.display());
    }
    Ok(if passes == reports.len() { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

// --- dim-probe ----------------------------------------------------------------

pub struct DimProbeOpts {
    pub machine: PathBuf,
    pub direction: Direction,
    pub seq: String,
    pub k_grid: Vec<usize>,
    pub s_grid: Vec<BigRational>,
    pub n_grid: Vec<usize>,
    pub out: Option<PathBuf>,
}

pub fn cmd_dim_probe(o: &DimProbeOpts) -> Result<i32, LabError> {
    let src = load_machine(&o.machine)?;
    // g2c probes mix zero bets internally with their own derived eps, so only
    // the compressor side needs preparation here.
    let base = match o.direction {
        Direction::C2g => {
            let (base, notes) = prepare_source(&src, Direction::C2g, None)?;
            for note in &notes {
                println!("note: {note}");
            }
            base
        }
        Direction::G2c => {
            if src.kind() != MachineKind::Gambler {
                return Err(LabError::usage("g2c starts from a gambler"));
            }
            src.clone()
        }
    };
    let max_n = *o.n_grid.last().unwrap();
    let w = generate_input(&o.seq, base.alphabet(), max_n)?;
    println!("probe direction {} machine {}", o.direction, describe_machine(&base));

    let mut probes = Vec::new();
    for &k in &o.k_grid {
        probes.push(
            theorem_probe(&base, o.direction.core(), k, &o.s_grid, &w, &o.n_grid)
                .map_err(verify_err)?,
        );
    }
    let csv = report::probe_csv(&probes);
    match &o.out {
        Some(dir) => {
            fs::create_dir_all(dir)
                .map_err(|source| LabError::Io { path: path_str(dir), source })?;
            let path = dir.join("probe.csv");
            write_file(&path, csv.as_bytes())?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }

    let summary = report::summarize_probes(&probes, base.alphabet().size());
    print!("{}", report::render_probe_summary(&summary));

    let broken: Vec<String> = probes
        .iter()
        .flat_map(|p| {
            p.rows.iter().filter(|r| !r.chain_holds).map(move |r| {
                format!("chain violated at k={} s={} n={}", p.k, r.s, r.n)
            })
        })
        .collect();
    for b in &broken {
        println!("{b}");
    }
    Ok(if broken.is_empty() { EXIT_OK } else { EXIT_VERIFY_FAILED })
}
