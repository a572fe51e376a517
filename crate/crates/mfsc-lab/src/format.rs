//! Machine files: a line-oriented text format that round-trips machine
//! descriptions losslessly.
//!
//! ```text
//! mfsc-machine v1
//! kind: compressor
//! alphabet: 0,1
//! heads: 2
//! t-states: a b
//! q-states: e
//! initial: a e
//! move: a b 1
//! step: e 0,0 e
//! out: e 0 10
//! ```
//!
//! The first significant line must be the header. Every other line is
//! `key: fields` with whitespace-separated fields; blank lines and lines
//! starting with `#` are skipped. State names may contain any non-whitespace
//! characters (materialized composite states use `:`/`|`/`[` freely), so
//! fields are positional rather than delimited. Symbol vectors are
//! comma-joined labels, rationals are `p/q` or a bare integer, bitstrings
//! are `0`/`1` runs with `-` standing for the empty string.
//!
//! Tables, one line per cell:
//!   `move: T NEXT FLAGS`  successor movement state and one `0`/`1` per
//!                         trailing head (`-` when there are none)
//!   `step: Q OBS NEXT`    symbol-state transition on an observation vector
//!   `out:  Q SYM BITS`    compressor emission (compressors only)
//!   `bet:  Q P ... P`     one probability per symbol (gamblers only)
//! Gamblers also carry a `capital:` line.
//!
//! [`parse_machine`] accepts lines after the header in any order, requires
//! every table cell exactly once, and reports the first problem with its
//! line number. [`render_machine`] emits the canonical order above, so
//! parsing a rendered spec is the identity and rendering a parsed file
//! canonicalizes it.

use std::fmt;
use std::fmt::Write as _;

use mfsc_core::bits::display_or_dash;
use mfsc_core::{Alphabet, Bits, MachineKind, MachineSpec, RationalDist, Sym};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

pub const HEADER: &str = "mfsc-machine v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// 1-based line, `None` for whole-file problems such as a missing table.
    pub line: Option<usize>,
    pub message: String,
}

impl ParseError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ParseError { line: Some(line), message: message.into() }
    }

    fn whole(message: impl Into<String>) -> Self {
        ParseError { line: None, message: message.into() }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "line {}: {}", n, self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ParseError {}

/// Parses `p/q` or a bare integer; the denominator must be nonzero.
pub fn rational_from_str(s: &str) -> Result<BigRational, String> {
    let (n, d) = s.split_once('/').unwrap_or((s, "1"));
    let numer: BigInt = n.parse().map_err(|_| format!("bad integer {n:?}"))?;
    let denom: BigInt = d.parse().map_err(|_| format!("bad integer {d:?}"))?;
    if denom.is_zero() {
        return Err(format!("zero denominator in {s:?}"));
    }
    Ok(BigRational::new(numer, denom))
}

/// Parses a bitstring field, `-` for the empty string.
pub fn bits_from_field(s: &str) -> Result<Bits, String> {
    if s == "-" {
        return Ok(Bits::new());
    }
    Bits::parse(s).map_err(|e| e.to_string())
}

/// Comma-joins the labels of a symbol vector; `-` for the empty vector.
pub fn label_vector(alphabet: &Alphabet, syms: &[Sym]) -> String {
    if syms.is_empty() {
        return "-".to_string();
    }
    syms.iter().map(|&a| alphabet.label(a)).collect::<Vec<_>>().join(",")
}

fn flags_str(flags: &[bool]) -> String {
    if flags.is_empty() {
        return "-".to_string();
    }
    flags.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn parse_flags(s: &str, want: usize, line: usize) -> Result<Vec<bool>, ParseError> {
    let flags: Vec<bool> = if s == "-" {
        Vec::new()
    } else {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(ParseError::at(line, format!("move flag {other:?} is not 0/1"))),
            })
            .collect::<Result<_, _>>()?
    };
    if flags.len() != want {
        return Err(ParseError::at(
            line,
            format!("{} move flags for {} trailing heads", flags.len(), want),
        ));
    }
    Ok(flags)
}

/// Renders a well-formed spec in canonical line order. Table shapes must be
/// consistent (as they are for any machine that passed validation).
pub fn render_machine(spec: &MachineSpec) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{HEADER}");
    let _ = writeln!(s, "kind: {}", spec.kind);
    let _ = writeln!(s, "alphabet: {}", spec.alphabet.labels().join(","));
    let _ = writeln!(s, "heads: {}", spec.heads);
    let _ = writeln!(s, "t-states: {}", spec.t_names.join(" "));
    let _ = writeln!(s, "q-states: {}", spec.q_names.join(" "));
    let _ = writeln!(
        s,
        "initial: {} {}",
        spec.t_names[spec.initial.0], spec.q_names[spec.initial.1]
    );
    for (t, &next) in spec.delta_t.iter().enumerate() {
        let _ = writeln!(
            s,
            "move: {} {} {}",
            spec.t_names[t],
            spec.t_names[next],
            flags_str(&spec.mu[t])
        );
    }
    let obs_count = spec.alphabet.size().pow(spec.heads as u32);
    for (q, row) in spec.delta_q.iter().enumerate() {
        for (packed, &next) in row.iter().enumerate().take(obs_count) {
            let obs = spec.alphabet.unpack_obs(packed, spec.heads);
            let _ = writeln!(
                s,
                "step: {} {} {}",
                spec.q_names[q],
                label_vector(&spec.alphabet, &obs),
                spec.q_names[next]
            );
        }
    }
    if let Some(nu) = &spec.nu {
        for (q, row) in nu.iter().enumerate() {
            for (a, bits) in row.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "out: {} {} {}",
                    spec.q_names[q],
                    spec.alphabet.label(Sym(a as u8)),
                    display_or_dash(bits)
                );
            }
        }
    }
    if let Some(beta) = &spec.beta {
        for (q, dist) in beta.iter().enumerate() {
            let probs: Vec<String> = dist.probs().iter().map(|p| p.to_string()).collect();
            let _ = writeln!(s, "bet: {} {}", spec.q_names[q], probs.join(" "));
        }
    }
    if let Some(c) = &spec.capital {
        let _ = writeln!(s, "capital: {c}");
    }
    s
}

struct Scalar {
    line: usize,
    value: String,
}

fn lookup(names: &[String], name: &str, what: &str, line: usize) -> Result<usize, ParseError> {
    names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| ParseError::at(line, format!("unknown {what} {name:?}")))
}

/// Parses the text format back into a spec. Structural validation beyond
/// what the format itself needs (table shapes, probability sums for the
/// machine as a whole) is left to the machine constructor.
pub fn parse_machine(text: &str) -> Result<MachineSpec, ParseError> {
    let mut header_seen = false;
    let mut scalars: Vec<(usize, &str, &str)> = Vec::new();
    let mut tables: Vec<(usize, &str, &str)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if line != HEADER {
                return Err(ParseError::at(
                    line_no,
                    format!("expected header {HEADER:?}, found {line:?}"),
                ));
            }
            header_seen = true;
            continue;
        }
        let Some((key, rest)) = line.split_once(':') else {
            return Err(ParseError::at(line_no, "expected `key: fields`"));
        };
        let (key, rest) = (key.trim(), rest.trim());
        match key {
            "kind" | "alphabet" | "heads" | "t-states" | "q-states" | "initial" | "capital" => {
                scalars.push((line_no, key, rest))
            }
            "move" | "step" | "out" | "bet" => tables.push((line_no, key, rest)),
            _ => return Err(ParseError::at(line_no, format!("unknown key {key:?}"))),
        }
    }
    if !header_seen {
        return Err(ParseError::whole(format!("empty file, expected header {HEADER:?}")));
    }

    let mut slots: [Option<Scalar>; 7] = Default::default();
    const KEYS: [&str; 7] =
        ["kind", "alphabet", "heads", "t-states", "q-states", "initial", "capital"];
    for (line, key, rest) in scalars {
        let idx = KEYS.iter().position(|k| *k == key).unwrap();
        if slots[idx].is_some() {
            return Err(ParseError::at(line, format!("duplicate {key}")));
        }
        slots[idx] = Some(Scalar { line, value: rest.to_string() });
    }
    let mut slots = slots.into_iter();
    let mut next_slot =
        |name: &str| slots.next().unwrap().ok_or_else(|| ParseError::whole(format!("missing {name}")));

    let kind_s = next_slot("kind")?;
    let kind = match kind_s.value.as_str() {
        "compressor" => MachineKind::Compressor,
        "gambler" => MachineKind::Gambler,
        other => {
            return Err(ParseError::at(
                kind_s.line,
                format!("kind must be compressor or gambler, found {other:?}"),
            ))
        }
    };

    let al_s = next_slot("alphabet")?;
    let labels: Vec<String> = al_s.value.split(',').map(str::to_string).collect();
    let alphabet = Alphabet::new(labels).map_err(|e| ParseError::at(al_s.line, e))?;
    let sigma = alphabet.size();

    let heads_s = next_slot("heads")?;
    let heads: usize = heads_s
        .value
        .parse()
        .map_err(|_| ParseError::at(heads_s.line, format!("bad head count {:?}", heads_s.value)))?;
    if heads == 0 {
        return Err(ParseError::at(heads_s.line, "head count must be at least 1"));
    }
    let obs_count = sigma
        .checked_pow(heads as u32)
        .ok_or_else(|| ParseError::at(heads_s.line, "observation space overflows"))?;

    let parse_names = |slot: Scalar, what: &str| -> Result<Vec<String>, ParseError> {
        let names: Vec<String> = slot.value.split_whitespace().map(str::to_string).collect();
        if names.is_empty() {
            return Err(ParseError::at(slot.line, format!("{what} needs at least one name")));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(ParseError::at(slot.line, format!("duplicate {what} name {n:?}")));
            }
        }
        Ok(names)
    };
    let t_names = parse_names(next_slot("t-states")?, "t-states")?;
    let q_names = parse_names(next_slot("q-states")?, "q-states")?;

    let init_s = next_slot("initial")?;
    let fields: Vec<&str> = init_s.value.split_whitespace().collect();
    if fields.len() != 2 {
        return Err(ParseError::at(init_s.line, "initial needs `t-state q-state`"));
    }
    let initial = (
        lookup(&t_names, fields[0], "movement state", init_s.line)?,
        lookup(&q_names, fields[1], "symbol state", init_s.line)?,
    );

    let capital_s = slots.next().unwrap();
    let capital = match (&kind, capital_s) {
        (MachineKind::Compressor, Some(sc)) => {
            return Err(ParseError::at(sc.line, "compressor with initial capital"))
        }
        (MachineKind::Compressor, None) => None,
        (MachineKind::Gambler, Some(sc)) => Some(
            rational_from_str(&sc.value).map_err(|e| ParseError::at(sc.line, e))?,
        ),
        (MachineKind::Gambler, None) => return Err(ParseError::whole("missing capital")),
    };

    let mut delta_t: Vec<Option<usize>> = vec![None; t_names.len()];
    let mut mu: Vec<Option<Vec<bool>>> = vec![None; t_names.len()];
    let mut delta_q: Vec<Vec<Option<usize>>> = vec![vec![None; obs_count]; q_names.len()];
    let mut nu: Vec<Vec<Option<Bits>>> = vec![vec![None; sigma]; q_names.len()];
    let mut beta: Vec<Option<RationalDist>> = vec![None; q_names.len()];

    for (line, key, rest) in tables {
        let fields: Vec<&str> = rest.split_whitespace().collect();
        match key {
            "move" => {
                if fields.len() != 3 {
                    return Err(ParseError::at(line, "move needs `state successor flags`"));
                }
                let t = lookup(&t_names, fields[0], "movement state", line)?;
                if delta_t[t].is_some() {
                    return Err(ParseError::at(line, format!("duplicate move row for {:?}", fields[0])));
                }
                delta_t[t] = Some(lookup(&t_names, fields[1], "movement state", line)?);
                mu[t] = Some(parse_flags(fields[2], heads - 1, line)?);
            }
            "step" => {
                if fields.len() != 3 {
                    return Err(ParseError::at(line, "step needs `state observation successor`"));
                }
                let q = lookup(&q_names, fields[0], "symbol state", line)?;
                let obs: Vec<Sym> = fields[1]
                    .split(',')
                    .map(|l| {
                        alphabet
                            .index_of(l)
                            .ok_or_else(|| ParseError::at(line, format!("unknown symbol {l:?}")))
                    })
                    .collect::<Result<_, _>>()?;
                if obs.len() != heads {
                    return Err(ParseError::at(
                        line,
                        format!("observation vector has {} symbols for {} heads", obs.len(), heads),
                    ));
                }
                let packed = alphabet.pack_obs(&obs);
                if delta_q[q][packed].is_some() {
                    return Err(ParseError::at(
                        line,
                        format!("duplicate step row for {:?} on {}", fields[0], fields[1]),
                    ));
                }
                delta_q[q][packed] = Some(lookup(&q_names, fields[2], "symbol state", line)?);
            }
            "out" => {
                if kind != MachineKind::Compressor {
                    return Err(ParseError::at(line, "gambler with output table"));
                }
                if fields.len() != 3 {
                    return Err(ParseError::at(line, "out needs `state symbol bits`"));
                }
                let q = lookup(&q_names, fields[0], "symbol state", line)?;
                let a = alphabet
                    .index_of(fields[1])
                    .ok_or_else(|| ParseError::at(line, format!("unknown symbol {:?}", fields[1])))?;
                if nu[q][a.0 as usize].is_some() {
                    return Err(ParseError::at(
                        line,
                        format!("duplicate out row for {:?} on {}", fields[0], fields[1]),
                    ));
                }
                nu[q][a.0 as usize] =
                    Some(bits_from_field(fields[2]).map_err(|e| ParseError::at(line, e))?);
            }
            "bet" => {
                if kind != MachineKind::Gambler {
                    return Err(ParseError::at(line, "compressor with betting table"));
                }
                if fields.len() != 1 + sigma {
                    return Err(ParseError::at(
                        line,
                        format!("bet needs `state` and {sigma} probabilities"),
                    ));
                }
                let q = lookup(&q_names, fields[0], "symbol state", line)?;
                if beta[q].is_some() {
                    return Err(ParseError::at(line, format!("duplicate bet row for {:?}", fields[0])));
                }
                let probs: Vec<BigRational> = fields[1..]
                    .iter()
                    .map(|f| rational_from_str(f).map_err(|e| ParseError::at(line, e)))
                    .collect::<Result<_, _>>()?;
                beta[q] = Some(RationalDist::new(probs).map_err(|e| ParseError::at(line, e))?);
            }
            _ => unreachable!(),
        }
    }

    let delta_t: Vec<usize> = delta_t
        .into_iter()
        .enumerate()
        .map(|(t, v)| v.ok_or_else(|| ParseError::whole(format!("move table has no row for {}", t_names[t]))))
        .collect::<Result<_, _>>()?;
    let mu: Vec<Vec<bool>> = mu.into_iter().map(|v| v.unwrap()).collect();
    let delta_q: Vec<Vec<usize>> = delta_q
        .into_iter()
        .enumerate()
        .map(|(q, row)| {
            row.into_iter()
                .enumerate()
                .map(|(packed, v)| {
                    v.ok_or_else(|| {
                        let obs = alphabet.unpack_obs(packed, heads);
                        ParseError::whole(format!(
                            "step table has no row for {} on {}",
                            q_names[q],
                            label_vector(&alphabet, &obs)
                        ))
                    })
                })
                .collect::<Result<_, _>>()
        })
        .collect::<Result<_, _>>()?;
    let nu = match kind {
        MachineKind::Gambler => None,
        MachineKind::Compressor => Some(
            nu.into_iter()
                .enumerate()
                .map(|(q, row)| {
                    row.into_iter()
                        .enumerate()
                        .map(|(a, v)| {
                            v.ok_or_else(|| {
                                ParseError::whole(format!(
                                    "output table has no row for {} on {}",
                                    q_names[q],
                                    alphabet.label(Sym(a as u8))
                                ))
                            })
                        })
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?,
        ),
    };
    let beta = match kind {
        MachineKind::Compressor => None,
        MachineKind::Gambler => Some(
            beta.into_iter()
                .enumerate()
                .map(|(q, v)| {
                    v.ok_or_else(|| {
                        ParseError::whole(format!("bet table has no row for {}", q_names[q]))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?,
        ),
    };

    Ok(MachineSpec {
        kind,
        alphabet,
        heads,
        t_names,
        q_names,
        initial,
        delta_t,
        mu,
        delta_q,
        nu,
        beta,
        capital,
    })
}
