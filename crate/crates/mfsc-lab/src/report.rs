//! CSV and JSONL renderers for traces, ratio tables, lemma streams and
//! theorem probes. Every CSV begins with a versioned schema comment so a
//! file identifies its own layout; bumping a layout bumps the version.

use std::cmp::Ordering;
use std::fmt::Write as _;

use mfsc_core::bits::display_or_dash;
use mfsc_core::gale::GaleValue;
use mfsc_core::numeric::cmp_rat_sigma_pow;
use mfsc_core::sim::{CompressorRun, GamblerRun, HeadTrace};
use mfsc_core::verify::{LemmaReport, TheoremProbe};
use mfsc_core::Fsm;
use num_rational::BigRational;
use serde_json::json;

use crate::format::label_vector;

pub const TRACE_SCHEMA: &str = "mfsc-trace v1";
pub const RATIO_SCHEMA: &str = "mfsc-ratio v1";
pub const SUMMARY_SCHEMA: &str = "mfsc-verify-summary v1";
pub const PROBE_SCHEMA: &str = "mfsc-dim-probe v1";

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn csv_row(fields: &[String]) -> String {
    let mut line = fields.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}

pub fn schema_line(schema: &str) -> String {
    format!("# schema: {schema}\n")
}

fn positions_field(positions: &[u64]) -> String {
    if positions.is_empty() {
        return "-".to_string();
    }
    positions.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
}

/// Shared columns of one trace row: step index, trailing-head positions,
/// observation vector, control state before the step. State names come from
/// the machine itself, so lazy composite machines render their structured
/// state descriptions.
fn trace_prefix(m: &dyn Fsm, trace: &HeadTrace, n: usize) -> Vec<String> {
    let (t, q) = trace.states[n];
    vec![
        n.to_string(),
        positions_field(&trace.positions[n]),
        label_vector(m.alphabet(), &trace.observations[n]),
        m.describe_t(t),
        m.describe_q(q),
    ]
}

/// Head trace of a compressor run, one row per step: the bits emitted while
/// consuming the observation at that step.
pub fn compressor_trace_csv(m: &dyn Fsm, run: &CompressorRun) -> String {
    let mut out = schema_line(TRACE_SCHEMA);
    out.push_str("n,positions,obs,t,q,emit\n");
    for n in 0..run.trace.len() {
        let mut row = trace_prefix(m, &run.trace, n);
        row.push(display_or_dash(&run.step_outputs[n]));
        out.push_str(&csv_row(&row));
    }
    out
}

/// Head trace of a gambler run, one row per step: the bet placed on the
/// symbol actually read and the capital after the payout.
pub fn gambler_trace_csv(m: &dyn Fsm, run: &GamblerRun) -> String {
    let mut out = schema_line(TRACE_SCHEMA);
    out.push_str("n,positions,obs,t,q,bet,capital\n");
    for n in 0..run.trace.len() {
        let mut row = trace_prefix(m, &run.trace, n);
        row.push(run.bets_taken[n].to_string());
        row.push(run.capitals[n + 1].to_string());
        out.push_str(&csv_row(&row));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub n: usize,
    pub output_bits: u64,
    /// `output_bits / (n log2 sigma)`.
    pub ratio: f64,
}

/// Compression ratio table. The exact numerator is the output_bits column;
/// only the ratio column rounds (to 12 decimal digits).
pub fn ratio_csv(rows: &[RatioRow]) -> String {
    let mut out = schema_line(RATIO_SCHEMA);
    out.push_str("n,output_bits,ratio\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{:.12}", r.n, r.output_bits, r.ratio);
    }
    out
}

pub fn lemma_json(r: &LemmaReport) -> serde_json::Value {
    let params: serde_json::Map<String, serde_json::Value> =
        r.params.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
    json!({
        "lemma": r.lemma,
        "machine": r.machine,
        "params": params,
        "lhs": r.lhs,
        "rhs": r.rhs,
        "holds": r.holds,
        "witness": r.witness,
    })
}

/// One report per line, in input order.
pub fn lemma_jsonl(reports: &[LemmaReport]) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(&lemma_json(r).to_string());
        out.push('\n');
    }
    out
}

/// Per-lemma pass/fail counts, rows sorted by lemma id.
pub fn lemma_summary_csv(reports: &[LemmaReport]) -> String {
    let mut counts: std::collections::BTreeMap<&str, (u64, u64)> = Default::default();
    for r in reports {
        let e = counts.entry(r.lemma).or_default();
        if r.holds {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    let mut out = schema_line(SUMMARY_SCHEMA);
    out.push_str("lemma,instances,passes,failures\n");
    for (lemma, (passes, failures)) in counts {
        let _ = writeln!(out, "{},{},{},{}", lemma, passes + failures, passes, failures);
    }
    out
}

/// Flat grid of every probe row; the per-probe constants repeat on each row
/// so the file needs no join to read.
pub fn probe_csv(probes: &[TheoremProbe]) -> String {
    let mut out = schema_line(PROBE_SCHEMA);
    out.push_str("direction,k,ell,eps,n_floor,mix_lambda,s,n,output_bits,gale_log2,premise,conclusion,chain\n");
    for p in probes {
        let lambda = p.mix_lambda.as_ref().map_or_else(|| "-".to_string(), |l| l.to_string());
        for r in &p.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{:.6},{},{},{}",
                p.direction,
                p.k,
                p.ell,
                p.eps,
                p.n_floor,
                lambda,
                r.s,
                r.n,
                r.output_bits,
                r.gale_log2,
                r.premise,
                r.conclusion,
                r.chain_holds
            );
        }
    }
    out
}

/// Exact order on represented gale values (both must share `sigma`).
pub fn cmp_gale(a: &GaleValue, b: &GaleValue) -> Ordering {
    assert_eq!(a.sigma, b.sigma, "gale values over different alphabets");
    match (a.is_zero(), b.is_zero()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (false, false) => {
            // a.m * s^a.e vs b.m * s^b.e  <=>  a.m / b.m vs s^(b.e - a.e)
            cmp_rat_sigma_pow(&a.mantissa, &b.mantissa, a.sigma, &(&b.exponent - &a.exponent))
        }
    }
}

/// Best upper-bound witnesses a probe grid exhibits. Sampling can only ever
/// witness upper bounds; no field of this summary estimates an infimum.
#[derive(Debug, Clone)]
pub struct ProbeSummary {
    /// Smallest compression ratio seen at the largest sampled n: (ratio, k, n).
    pub ratio_witness: Option<(f64, usize, usize)>,
    /// Smallest s whose s-gale both grew across the sampled n-grid and ended
    /// above 1: (s, k).
    pub dim_witness: Option<(BigRational, usize)>,
}

pub fn summarize_probes(probes: &[TheoremProbe], sigma: usize) -> ProbeSummary {
    let log_sigma = (sigma as f64).log2();
    let mut ratio_witness: Option<(f64, usize, usize)> = None;
    let mut dim_witness: Option<(BigRational, usize)> = None;
    for p in probes {
        if let Some(last) = p.rows.iter().filter(|r| r.n > 0).max_by_key(|r| r.n) {
            let ratio = last.output_bits as f64 / (last.n as f64 * log_sigma);
            if ratio_witness.is_none_or(|(best, _, _)| ratio < best) {
                ratio_witness = Some((ratio, p.k, last.n));
            }
        }
        // rows are grouped by s with n ascending inside each group
        let mut i = 0;
        while i < p.rows.len() {
            let mut j = i;
            while j + 1 < p.rows.len() && p.rows[j + 1].s == p.rows[i].s {
                j += 1;
            }
            let (first, last) = (&p.rows[i], &p.rows[j]);
            let grew = j > i && cmp_gale(&last.gale, &first.gale) == Ordering::Greater;
            let above_one = !last.gale.is_zero() && last.gale.cmp_one() == Ordering::Greater;
            if grew && above_one {
                let s = &p.rows[i].s;
                if dim_witness.as_ref().is_none_or(|(best, _)| s < best) {
                    dim_witness = Some((s.clone(), p.k));
                }
            }
            i = j + 1;
        }
    }
    ProbeSummary { ratio_witness, dim_witness }
}

pub fn render_probe_summary(s: &ProbeSummary) -> String {
    let mut out = String::new();
    match &s.ratio_witness {
        Some((ratio, k, n)) => {
            let _ = writeln!(
                out,
                "ratio upper-bound witness: {ratio:.12} at k={k} n={n} (smallest sampled ratio; not an infimum)"
            );
        }
        None => out.push_str("ratio upper-bound witness: none (no positive-n samples)\n"),
    }
    match &s.dim_witness {
        Some((sv, k)) => {
            let _ = writeln!(
                out,
                "dim upper-bound witness: s={sv} at k={k} (s-gale grew over the sampled n-grid and ended above 1; not an infimum)"
            );
        }
        None => {
            out.push_str("dim upper-bound witness: none (no sampled s-gale grew above 1)\n");
        }
    }
    out.push_str("witnesses are upper bounds observed on the sampled grid only\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use mfsc_core::verify::LemmaReport;
    use num_traits::One;

    #[test]
    fn csv_quoting_only_when_needed() {
        let row = csv_row(&["plain".into(), "a,b".into(), "say \"hi\"".into()]);
        assert_eq!(row, "plain,\"a,b\",\"say \"\"hi\"\"\"\n");
    }

    #[test]
    fn summary_counts_by_lemma() {
        let mk = |lemma: &'static str, holds: bool| LemmaReport {
            lemma,
            machine: "m".into(),
            params: vec![],
            lhs: "1".into(),
            rhs: "1".into(),
            holds,
            witness: None,
        };
        let reports = [mk("b", true), mk("a", true), mk("b", false)];
        let csv = lemma_summary_csv(&reports);
        assert_eq!(
            csv,
            "# schema: mfsc-verify-summary v1\nlemma,instances,passes,failures\na,1,1,0\nb,2,1,1\n"
        );
    }

    #[test]
    fn jsonl_is_one_object_per_line() {
        let r = LemmaReport {
            lemma: "suffix-ratio",
            machine: "compressor sigma=2 heads=1 |T|=1 |Q|=1".into(),
            params: vec![("k", "2".into()), ("m", "1".into())],
            lhs: "4/3".into(),
            rhs: "4/3".into(),
            holds: true,
            witness: None,
        };
        let text = lemma_jsonl(&[r]);
        assert_eq!(text.lines().count(), 1);
        let v: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(v["lemma"], "suffix-ratio");
        assert_eq!(v["params"]["k"], "2");
        assert_eq!(v["holds"], true);
        assert_eq!(v["witness"], serde_json::Value::Null);
    }

    #[test]
    fn gale_order_is_exact() {
        let g = |m: i64, e: i64| GaleValue {
            mantissa: BigRational::from_integer(m.into()),
            sigma: 2,
            exponent: BigRational::from_integer(e.into()),
        };
        // 3 * 2^0 vs 1 * 2^2  ->  3 < 4
        assert_eq!(cmp_gale(&g(3, 0), &g(1, 2)), Ordering::Less);
        assert_eq!(cmp_gale(&g(4, 0), &g(1, 2)), Ordering::Equal);
        assert_eq!(cmp_gale(&g(5, 0), &g(1, 2)), Ordering::Greater);
        let zero = GaleValue { mantissa: BigRational::from_integer(0.into()), sigma: 2, exponent: BigRational::one() };
        assert_eq!(cmp_gale(&zero, &g(1, 0)), Ordering::Less);
    }
}
