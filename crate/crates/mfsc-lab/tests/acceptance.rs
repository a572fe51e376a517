//! Acceptance gate: ten criteria, each a test that prints one
//! `ACCEPTANCE <i> <name>: PASS|FAIL` line (visible with --nocapture) and
//! asserts it. Tolerances and time limits are pinned here in code.

use std::time::{Duration, Instant};

use mfsc_core::construct::{
    compressor_to_gambler, fold_full_speed_heads, full_stream_decode, gambler_to_compressor,
    setup_params, BlockMeasure,
};
use mfsc_core::gale::check_gale_identity;
use mfsc_core::machine::{MachineSpec, RationalDist};
use mfsc_core::numeric::{ceil_neg_log2, pow2, rat};
use mfsc_core::seq::{generate, SequenceSpec, SplitMix64};
use mfsc_core::sim::{positions_through, run_compressor, speed_profile};
use mfsc_core::sfe::{codebook, sfe_decode, CylinderMeasure};
use mfsc_core::verify::{
    check_block_bound_on, check_compressor_bound, check_divisible_bound_on,
    check_general_bound_on, check_information_lossless, check_nonvanishing_bound,
    check_speed_bound, check_suffix_equality_on, composite_gambler_run, random_gambler,
    random_il_compressor, random_movement_compressor,
};
use mfsc_core::{Alphabet, Bits, Fsm, MachineKind, Sym, TableMachine};
use num_rational::BigRational;
use num_traits::{One, Zero};

fn syms(xs: &[u8]) -> Vec<Sym> {
    xs.iter().map(|&x| Sym(x)).collect()
}

fn random_word(rng: &mut SplitMix64, sigma: usize, len: usize) -> Vec<Sym> {
    (0..len).map(|_| Sym(rng.next_below(sigma as u64) as u8)).collect()
}

/// Prints the verdict line first so it is never lost to a panic, then fails
/// the test with the collected evidence.
fn conclude(idx: usize, name: &str, failures: Vec<String>) {
    let pass = failures.is_empty();
    println!("ACCEPTANCE {idx} {name}: {}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {idx} ({name}):\n{}", failures.join("\n"));
}

fn check_time(elapsed: Duration, limit: Duration, failures: &mut Vec<String>) {
    if elapsed > limit {
        failures.push(format!("runtime {elapsed:?} exceeded the {limit:?} limit"));
    }
}

fn alternation_gambler() -> TableMachine {
    TableMachine::new(MachineSpec {
        kind: MachineKind::Gambler,
        alphabet: Alphabet::numeric(2),
        heads: 1,
        t_names: vec!["t".into()],
        q_names: vec!["e0".into(), "e1".into()],
        initial: (0, 0),
        delta_t: vec![0],
        mu: vec![vec![]],
        delta_q: vec![vec![1, 0], vec![1, 0]],
        nu: None,
        beta: Some(vec![
            RationalDist::new(vec![rat(3, 4), rat(1, 4)]).unwrap(),
            RationalDist::new(vec![rat(1, 4), rat(3, 4)]).unwrap(),
        ]),
        capital: Some(rat(1, 1)),
    })
    .unwrap()
}

fn silent_compressor() -> TableMachine {
    TableMachine::new(MachineSpec {
        kind: MachineKind::Compressor,
        alphabet: Alphabet::numeric(2),
        heads: 1,
        t_names: vec!["t".into()],
        q_names: vec!["e".into()],
        initial: (0, 0),
        delta_t: vec![0],
        mu: vec![vec![]],
        delta_q: vec![vec![0, 0]],
        nu: Some(vec![vec![Bits::new(), Bits::new()]]),
        beta: None,
        capital: None,
    })
    .unwrap()
}

fn asym_compressor() -> TableMachine {
    TableMachine::new(MachineSpec {
        kind: MachineKind::Compressor,
        alphabet: Alphabet::numeric(2),
        heads: 1,
        t_names: vec!["t".into()],
        q_names: vec!["e".into()],
        initial: (0, 0),
        delta_t: vec![0],
        mu: vec![vec![]],
        delta_q: vec![vec![0, 0]],
        nu: Some(vec![vec![Bits::from("0"), Bits::from("10")]]),
        beta: None,
        capital: None,
    })
    .unwrap()
}

#[test]
fn acceptance_01_gale_identity() {
    let t0 = Instant::now();
    let mut rng = SplitMix64::new(0xAC01);
    let mut failures = Vec::new();
    for i in 0..200usize {
        let sigma = [2, 3][i % 2];
        let heads = 1 + i % 3;
        let g = random_gambler(&mut rng, sigma, heads, 3, 3, i % 4 == 0);
        match check_gale_identity(&g, 6) {
            Ok(None) => {}
            Ok(Some(cex)) => failures.push(format!(
                "instance {i}: identity fails at |w|={}: d(w)={} mean={}",
                cex.w.len(),
                cex.lhs,
                cex.rhs
            )),
            Err(e) => failures.push(format!("instance {i}: {e}")),
        }
    }
    check_time(t0.elapsed(), Duration::from_secs(60), &mut failures);
    conclude(1, "gale-identity", failures);
}

#[test]
fn acceptance_02_head_kinematics() {
    let t0 = Instant::now();
    let mut rng = SplitMix64::new(0xAC02);
    let mut failures = Vec::new();
    for i in 0..100usize {
        let heads = 1 + i % 3;
        let m = random_movement_compressor(&mut rng, 2, heads, 4);

        if let Some(v) = check_speed_bound(&m, 10_000) {
            failures.push(format!(
                "instance {i}: head {} at n={} deviates by {} with slack {}",
                v.head, v.n, v.deviation, v.slack
            ));
        }

        // alignment of the constructed gambler's heads with the source; a
        // full-speed trailing head is folded away first, as the construction
        // requires, and alignment is then read off the folded source
        let base = if speed_profile(&m).alphas.iter().any(|a| a.is_one()) {
            match fold_full_speed_heads(&m) {
                Ok(f) => f,
                Err(e) => {
                    failures.push(format!("instance {i}: fold failed: {e}"));
                    continue;
                }
            }
        } else {
            m.clone()
        };
        for k in 1..=4usize {
            let params = match setup_params(&base, k) {
                Ok(p) => p,
                Err(e) => {
                    failures.push(format!("instance {i} k={k}: {e}"));
                    continue;
                }
            };
            let g = match compressor_to_gambler(&base, k) {
                Ok(g) => g,
                Err(e) => {
                    failures.push(format!("instance {i} k={k}: {e}"));
                    continue;
                }
            };
            let gam_pos = positions_through(&g, 1000);
            let src_pos = positions_through(&base, 1000 + k as u64);
            for n in params.n0..=1000 {
                if gam_pos[n] != src_pos[n + k] {
                    failures.push(format!(
                        "instance {i} k={k}: alignment fails at n={n}: {:?} vs {:?}",
                        gam_pos[n],
                        src_pos[n + k]
                    ));
                    break;
                }
            }
        }
    }
    check_time(t0.elapsed(), Duration::from_secs(30), &mut failures);
    conclude(2, "head-kinematics", failures);
}

/// Criteria 3 and 4 share one instance family; the seed fixes it.
fn suffix_family(
    rng: &mut SplitMix64,
    i: usize,
) -> (TableMachine, usize) {
    let sigma = [2, 3][i % 2];
    let heads = 1 + i % 3;
    (random_il_compressor(rng, sigma, heads, 3, 3), sigma)
}

#[test]
fn acceptance_03_suffix_equality() {
    let t0 = Instant::now();
    let mut rng = SplitMix64::new(0xAC03);
    let mut failures = Vec::new();
    let mut checked = 0usize;
    for i in 0..100usize {
        let (c, sigma) = suffix_family(&mut rng, i);
        for k in [1usize, 2, 3] {
            let params = setup_params(&c, k).expect("slow movement by construction");
            let len = params.ell + 3 * k;
            let w = random_word(&mut rng, sigma, len);
            let run = match composite_gambler_run(&c, k, &w) {
                Ok(r) => r,
                Err(e) => {
                    failures.push(format!("instance {i} k={k}: {e}"));
                    continue;
                }
            };
            for m_blocks in params.ell / k..=len / k {
                for j in 0..=k {
                    if m_blocks * k + j > len {
                        continue;
                    }
                    let r = check_suffix_equality_on(&c, &run, m_blocks, j);
                    checked += 1;
                    if !r.holds {
                        failures.push(format!("instance {i}: {r}"));
                    }
                }
            }
        }
    }
    assert!(checked >= 3000, "family produced only {checked} checks");
    check_time(t0.elapsed(), Duration::from_secs(300), &mut failures);
    conclude(3, "suffix-equality", failures);
}

#[test]
fn acceptance_04_block_bounds() {
    let t0 = Instant::now();
    let mut rng = SplitMix64::new(0xAC03);
    let mut failures = Vec::new();
    let mut off_grid = 0usize;
    for i in 0..100usize {
        let (c, sigma) = suffix_family(&mut rng, i);
        for k in [1usize, 2, 3] {
            let params = setup_params(&c, k).expect("slow movement by construction");
            let len = params.ell + 3 * k;
            let w = random_word(&mut rng, sigma, len);
            let run = match composite_gambler_run(&c, k, &w) {
                Ok(r) => r,
                Err(e) => {
                    failures.push(format!("instance {i} k={k}: {e}"));
                    continue;
                }
            };
            for m_blocks in params.ell / k..=len / k {
                for r in
                    [check_block_bound_on(&run, m_blocks), check_divisible_bound_on(&run, m_blocks)]
                {
                    if !r.holds {
                        failures.push(format!("instance {i}: {r}"));
                    }
                }
            }
            for n in 0..=len {
                if n % k != 0 {
                    off_grid += 1;
                }
                let r = check_general_bound_on(&run, n);
                if !r.holds {
                    failures.push(format!("instance {i}: {r}"));
                }
            }
        }
    }
    assert!(off_grid > 0, "family never exercised n not divisible by k");
    check_time(t0.elapsed(), Duration::from_secs(300), &mut failures);
    conclude(4, "block-bounds", failures);
}

#[test]
fn acceptance_05_mixing_loss() {
    let mut rng = SplitMix64::new(0xAC05);
    let mut failures = Vec::new();
    let epsilons = [rat(1, 1), rat(1, 2), rat(1, 4)];
    for i in 0..50usize {
        let sigma = [2, 3][i % 2];
        let heads = 1 + i % 3;
        let g = random_gambler(&mut rng, sigma, heads, 3, 3, i % 2 == 0);
        let w = random_word(&mut rng, sigma, 8);
        for eps in &epsilons {
            match check_nonvanishing_bound(&g, eps, &w) {
                Ok(r) => {
                    let flag = |key: &str| {
                        r.params.iter().any(|(k, v)| *k == key && v == "true")
                    };
                    if !r.holds {
                        failures.push(format!("instance {i}: {r}"));
                    }
                    if !flag("per_step_holds") {
                        failures.push(format!("instance {i} eps={eps}: per-step factor fails"));
                    }
                    if !flag("certified") {
                        failures.push(format!("instance {i} eps={eps}: (1-lambda) >= 2^-eps fails"));
                    }
                }
                Err(e) => failures.push(format!("instance {i} eps={eps}: {e}")),
            }
        }
    }
    conclude(5, "mixing-loss", failures);
}

#[test]
fn acceptance_06_sfe_codec() {
    let mut rng = SplitMix64::new(0xAC06);
    let mut failures = Vec::new();
    for i in 0..50usize {
        let sigma = [2, 3][i % 2];
        let heads = 1 + i % 2;
        let k = 1 + i % 4;
        let g = random_gambler(&mut rng, sigma, heads, 3, 3, true);
        let record: Vec<Vec<Sym>> =
            (0..k).map(|_| random_word(&mut rng, sigma, heads - 1)).collect();
        let meas = BlockMeasure::new(&g, g.initial_state().1, record, k);
        let book = match codebook(&meas) {
            Ok(b) => b,
            Err(e) => {
                failures.push(format!("instance {i}: {e}"));
                continue;
            }
        };
        if book.len() != sigma.pow(k as u32) {
            failures.push(format!("instance {i}: {} codewords, want sigma^k", book.len()));
            continue;
        }
        for (a, (_, ca)) in book.iter().enumerate() {
            for (b, (_, cb)) in book.iter().enumerate() {
                if a != b && ca.is_prefix_of(cb) {
                    failures.push(format!("instance {i}: codeword {ca} is a prefix of {cb}"));
                }
            }
        }
        let mut kraft = BigRational::zero();
        for (block, code) in &book {
            let p = meas.cylinder(block);
            let want = 1 + ceil_neg_log2(&p) as usize;
            if code.len() != want {
                failures.push(format!(
                    "instance {i}: code length {} for mass {p}, want {want}",
                    code.len()
                ));
            }
            kraft += pow2(-(code.len() as i64));
            match sfe_decode(&meas, code, 0) {
                Ok((dec, used)) => {
                    if dec != *block || used != code.len() {
                        failures.push(format!("instance {i}: decode of {code} mismatches"));
                    }
                }
                Err(e) => failures.push(format!("instance {i}: decode error {e}")),
            }
        }
        if kraft > BigRational::one() {
            failures.push(format!("instance {i}: Kraft sum {kraft} exceeds 1"));
        }
    }
    conclude(6, "sfe-codec", failures);
}

#[test]
fn acceptance_07_constructive_losslessness() {
    let t0 = Instant::now();
    let mut rng = SplitMix64::new(0xAC07);
    let mut failures = Vec::new();
    for i in 0..6usize {
        let sigma = [2, 2, 3][i % 3];
        let heads = 1 + i % 2;
        let g = random_gambler(&mut rng, sigma, heads, 3, 3, true);
        for k in [1usize, 2] {
            let comp = match gambler_to_compressor(&g, k) {
                Ok(c) => c,
                Err(e) => {
                    failures.push(format!("machine {i} k={k}: {e}"));
                    continue;
                }
            };
            let ell = comp.params().ell;
            for t in 0..250usize {
                let len = rng.next_below((ell + 3 * k + 1) as u64) as usize;
                let w = random_word(&mut rng, sigma, len);
                let run = match run_compressor(&comp, &w) {
                    Ok(r) => r,
                    Err(e) => {
                        failures.push(format!("machine {i} k={k} trial {t}: {e}"));
                        continue;
                    }
                };
                let tail = &w[len - len % k..];
                match full_stream_decode(&g, k, &run.output, tail) {
                    Ok(dec) => {
                        if dec != w {
                            failures.push(format!(
                                "machine {i} k={k} trial {t}: decode returned a different word"
                            ));
                        }
                    }
                    Err(e) => failures.push(format!("machine {i} k={k} trial {t}: {e}")),
                }
            }
            if sigma == 2 {
                match check_information_lossless(&comp, ell + 2 * k) {
                    Ok(None) => {}
                    Ok(Some(col)) => failures.push(format!(
                        "machine {i} k={k}: collision between lengths {} and {}",
                        col.first.len(),
                        col.second.len()
                    )),
                    Err(e) => failures.push(format!("machine {i} k={k}: {e}")),
                }
            }
        }
    }
    check_time(t0.elapsed(), Duration::from_secs(300), &mut failures);
    conclude(7, "constructive-losslessness", failures);
}

#[test]
fn acceptance_08_code_length_bound() {
    let mut rng = SplitMix64::new(0xAC08);
    let mut failures = Vec::new();
    for i in 0..100usize {
        let sigma = [2, 3][i % 2];
        let heads = 1 + i % 2;
        let k = [1usize, 2, 4][i % 3];
        let g = random_gambler(&mut rng, sigma, heads, 3, 3, true);
        let params = setup_params(&g, k).expect("slow movement by construction");
        let n = params.ell + 1 + (i * 63) / 99;
        let w = random_word(&mut rng, sigma, n);
        match check_compressor_bound(&g, k, n, &w) {
            Ok(r) => {
                if !r.holds {
                    failures.push(format!("instance {i}: {r}"));
                }
            }
            Err(e) => failures.push(format!("instance {i}: {e}")),
        }
    }
    conclude(8, "code-length-bound", failures);
}

#[test]
fn acceptance_09_end_to_end_witness() {
    let t0 = Instant::now();
    let mut failures = Vec::new();
    let g = alternation_gambler();
    let w = generate(&SequenceSpec::Periodic { pattern: syms(&[0, 1]) }, 2, 4096).unwrap();
    let comp = gambler_to_compressor(&g, 16).unwrap();
    let run = run_compressor(&comp, &w).unwrap();
    let bits = run.output.len();
    // 16 setup bits plus 255 blocks of 8 bits each
    if bits != 2056 {
        failures.push(format!("output is {bits} bits, expected 2056"));
    }
    let ratio = bits as f64 / 4096.0;
    if !(0.41..=0.57).contains(&ratio) {
        failures.push(format!("ratio {ratio} outside [0.41, 0.57]"));
    }
    // analytical ceiling 1 - log2(3/2) + 2/k from the bet and block length
    let target = 1.0 - 1.5f64.log2() + 2.0 / 16.0;
    if ratio > target {
        failures.push(format!("ratio {ratio} exceeds the analytical ceiling {target}"));
    }
    check_time(t0.elapsed(), Duration::from_secs(60), &mut failures);
    conclude(9, "end-to-end-witness", failures);
}

#[test]
fn acceptance_10_negative_controls() {
    let mut failures = Vec::new();

    // a silent compressor collides immediately: the empty word and "0" both
    // map to (empty output, initial state)
    match check_information_lossless(&silent_compressor(), 1) {
        Ok(Some(col)) => {
            let mut lens = [col.first.len(), col.second.len()];
            lens.sort_unstable();
            if lens != [0, 1] || !col.output.is_empty() {
                failures.push(format!(
                    "unexpected collision shape: lengths {lens:?}, output {}",
                    col.output
                ));
            }
        }
        Ok(None) => failures.push("silent compressor passed the losslessness check".into()),
        Err(e) => failures.push(format!("losslessness check errored: {e}")),
    }

    // a bet row that is not a distribution must break the averaging identity
    let mut spec = alternation_gambler().spec().clone();
    spec.beta = Some(vec![
        RationalDist::new_unchecked(vec![rat(3, 4), rat(1, 2)]),
        RationalDist::new(vec![rat(1, 4), rat(3, 4)]).unwrap(),
    ]);
    let broken = TableMachine::new_unchecked(spec);
    match check_gale_identity(&broken, 3) {
        Ok(Some(_)) => {}
        Ok(None) => failures.push("inflated bet row passed the identity check".into()),
        Err(e) => failures.push(format!("identity check errored: {e}")),
    }

    // checking a run against a sibling whose output table was mutated must
    // break the suffix equality somewhere
    let honest = asym_compressor();
    let mut mutated_spec = honest.spec().clone();
    mutated_spec.nu = Some(vec![vec![Bits::from("0"), Bits::from("100")]]);
    let mutated = TableMachine::new(mutated_spec).unwrap();
    let w = syms(&[0, 1, 0, 1]);
    let run = composite_gambler_run(&honest, 1, &w).unwrap();
    let params = run.params().clone();
    let len = w.len();
    let mut any_broken = false;
    for m_blocks in params.ell..=len {
        for j in 0..=1usize {
            if m_blocks + j > len {
                continue;
            }
            if !check_suffix_equality_on(&mutated, &run, m_blocks, j).holds {
                any_broken = true;
            }
        }
    }
    if !any_broken {
        failures.push("mutated output table still satisfied every suffix equality".into());
    }

    conclude(10, "negative-controls", failures);
}
