//! End-to-end tests of the mfsc binary: flags, files, stdout and exit codes.

use std::fs;
use std::process::{Command, Output};

fn mfsc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfsc")).args(args).output().expect("binary runs")
}

fn machine(name: &str) -> String {
    format!("{}/machines/{}", env!("CARGO_MANIFEST_DIR"), name)
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf8 stderr")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn simulate_identity_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sim");
    let out = mfsc(&[
        "simulate",
        "--machine",
        &machine("identity.mfsc"),
        "--seq",
        "periodic:01",
        "--n",
        "8",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));
    assert_eq!(fs::read_to_string(out_dir.join("output.bits")).unwrap(), "01010101");
    let trace = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("# schema: mfsc-trace v1\n"));
    assert_eq!(trace.lines().count(), 2 + 8, "schema + header + 8 rows");
    let packed = fs::read(out_dir.join("output.packed")).unwrap();
    assert_eq!(packed, vec![0b01010101]);
}

#[test]
fn simulate_half_speed_positions_lag() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sim");
    let out = mfsc(&[
        "simulate",
        "--machine",
        &machine("half-speed.mfsc"),
        "--seq",
        "periodic:01",
        "--n",
        "6",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let trace = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    let positions: Vec<&str> =
        trace.lines().skip(2).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(positions, ["0", "1", "1", "2", "2", "3"]);
}

#[test]
fn simulate_gambler_reports_final_capital() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sim");
    let out = mfsc(&[
        "simulate",
        "--machine",
        &machine("alternation.mfsc"),
        "--seq",
        "periodic:01",
        "--n",
        "4",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    // four correct guesses at 3/4 each: (2 * 3/4)^4 = 81/16
    assert!(stdout_of(&out).contains("final capital: 81/16"));
}

#[test]
fn construct_prints_setup_parameters() {
    let out =
        mfsc(&["construct", "--machine", &machine("half-speed.mfsc"), "--direction", "c2g", "--k", "2"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("n0=2 ell=4"), "got: {text}");
    assert!(text.contains("M=1"), "got: {text}");
    assert!(text.contains("reachable states within depth 8"), "got: {text}");
}

#[test]
fn construct_export_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let frag = dir.path().join("frag.mfsc");
    let out = mfsc(&[
        "construct",
        "--machine",
        &machine("half-speed.mfsc"),
        "--direction",
        "c2g",
        "--k",
        "2",
        "--export",
        frag.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));
    assert!(stdout_of(&out).contains("exported"));

    // the exported fragment must simulate exactly like the in-process handle
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let run_frag = mfsc(&[
        "simulate",
        "--machine",
        frag.to_str().unwrap(),
        "--seq",
        "debruijn:3",
        "--n",
        "8",
        "--out",
        a.to_str().unwrap(),
    ]);
    assert_eq!(code(&run_frag), 0, "stderr: {}", stderr_of(&run_frag));
    let run_lazy = mfsc(&[
        "simulate",
        "--machine",
        &machine("half-speed.mfsc"),
        "--construct",
        "c2g",
        "--k",
        "2",
        "--seq",
        "debruijn:3",
        "--n",
        "8",
        "--out",
        b.to_str().unwrap(),
    ]);
    assert_eq!(code(&run_lazy), 0, "stderr: {}", stderr_of(&run_lazy));
    let capitals = |p: &std::path::Path| -> Vec<String> {
        fs::read_to_string(p.join("trace.csv"))
            .unwrap()
            .lines()
            .skip(2)
            .map(|l| l.rsplit(',').next().unwrap().to_string())
            .collect()
    };
    assert_eq!(capitals(&a), capitals(&b));
}

#[test]
fn g2c_with_zero_bets_needs_eps() {
    let out =
        mfsc(&["construct", "--machine", &machine("onesided.mfsc"), "--direction", "g2c", "--k", "2"]);
    assert_eq!(code(&out), 2);
    assert!(stderr_of(&out).contains("--eps"), "got: {}", stderr_of(&out));

    let with_eps = mfsc(&[
        "construct",
        "--machine",
        &machine("onesided.mfsc"),
        "--direction",
        "g2c",
        "--k",
        "2",
        "--eps",
        "1/2",
    ]);
    assert_eq!(code(&with_eps), 0, "stderr: {}", stderr_of(&with_eps));
    assert!(stdout_of(&with_eps).contains("note: mixed bets toward uniform"));
}

#[test]
fn ratio_identity_is_one() {
    let out = mfsc(&[
        "ratio",
        "--machine",
        &machine("identity.mfsc"),
        "--seq",
        "champernowne:2",
        "--n-grid",
        "4,16,64",
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout_of(&out);
    assert!(text.starts_with("# schema: mfsc-ratio v1\n"));
    for line in text.lines().skip(2) {
        assert!(line.ends_with(",1.000000000000"), "got: {line}");
    }
}

#[test]
fn ratio_constructed_compressor_beats_one_on_its_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ratio.csv");
    let out = mfsc(&[
        "ratio",
        "--machine",
        &machine("alternation.mfsc"),
        "--construct",
        "g2c",
        "--k",
        "16",
        "--seq",
        "periodic:01",
        "--n-grid",
        "4096",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.contains("4096,2056,0.501953125000"), "got: {text}");
}

#[test]
fn ratio_rejects_plain_gambler() {
    let out = mfsc(&[
        "ratio",
        "--machine",
        &machine("uniform.mfsc"),
        "--seq",
        "periodic:01",
        "--n-grid",
        "8",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr_of(&out).contains("needs a compressor"));
}

#[test]
fn verify_suite_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = mfsc(&[
        "verify",
        "--suite",
        "gale-identity",
        "--seed",
        "7",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));
    assert!(stdout_of(&out).contains("suite gale-identity: 12/12 hold"));
    let jsonl = fs::read_to_string(dir.path().join("gale-identity.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 12);
    assert!(jsonl.lines().all(|l| l.contains("\"holds\":true")));
    let csv = fs::read_to_string(dir.path().join("gale-identity-summary.csv")).unwrap();
    assert!(csv.starts_with("# schema: mfsc-verify-summary v1\n"));
    assert!(csv.contains("gale-identity,12,12,0"));
}

#[test]
fn verify_il_flags_silent_machine() {
    let out = mfsc(&["verify", "--suite", "il", "--machine", &machine("silent.mfsc")]);
    assert_eq!(code(&out), 1);
    let text = stdout_of(&out);
    assert!(text.contains("VIOLATED"), "got: {text}");
    assert!(text.contains("suite il: 0/1 hold"), "got: {text}");
}

#[test]
fn verify_il_budget_exceeded_is_exit_3() {
    let out = mfsc(&[
        "verify",
        "--suite",
        "il",
        "--max-len",
        "23",
        "--machine",
        &machine("identity.mfsc"),
    ]);
    assert_eq!(code(&out), 3);
    assert!(stderr_of(&out).contains("budget"), "got: {}", stderr_of(&out));
}

#[test]
fn verify_unknown_suite_is_usage_error() {
    let out = mfsc(&["verify", "--suite", "everything"]);
    assert_eq!(code(&out), 2);
    assert!(stderr_of(&out).contains("unknown suite"));
}

#[test]
fn missing_required_flag_is_usage_error() {
    let out = mfsc(&["simulate", "--seq", "periodic:01", "--n", "4"]);
    assert_eq!(code(&out), 2);
    assert!(stderr_of(&out).contains("missing --machine"));
}

#[test]
fn dim_probe_prints_witnesses_and_disclaims_infimum() {
    let out = mfsc(&[
        "dim-probe",
        "--machine",
        &machine("alternation.mfsc"),
        "--direction",
        "g2c",
        "--seq",
        "periodic:01",
        "--k-grid",
        "2,4",
        "--s-grid",
        "1/2,3/4",
        "--n-grid",
        "64,256",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("ratio upper-bound witness:"), "got: {text}");
    assert!(text.contains("dim upper-bound witness:"), "got: {text}");
    assert!(text.contains("not an infimum"), "got: {text}");
    assert!(!text.to_lowercase().contains(" infimum of"), "got: {text}");
}

#[test]
fn config_file_mirrors_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("probe.cfg");
    fs::write(
        &cfg,
        format!(
            "machine = {}\ndirection = g2c\nseq = periodic:01\nk-grid = 2,4\ns-grid = 1/2,3/4\nn-grid = 64,256\n",
            machine("alternation.mfsc")
        ),
    )
    .unwrap();
    let via_cfg = mfsc(&["dim-probe", "--config", cfg.to_str().unwrap()]);
    let via_flags = mfsc(&[
        "dim-probe",
        "--machine",
        &machine("alternation.mfsc"),
        "--direction",
        "g2c",
        "--seq",
        "periodic:01",
        "--k-grid",
        "2,4",
        "--s-grid",
        "1/2,3/4",
        "--n-grid",
        "64,256",
    ]);
    assert_eq!(code(&via_cfg), 0, "stderr: {}", stderr_of(&via_cfg));
    assert_eq!(via_cfg.stdout, via_flags.stdout);

    // the flag overrides the config key of the same name
    let overridden = mfsc(&["dim-probe", "--config", cfg.to_str().unwrap(), "--k-grid", "3"]);
    assert_eq!(code(&overridden), 0);
    assert!(stdout_of(&overridden).contains("g2c,3,"));
    assert!(!stdout_of(&overridden).contains("g2c,2,"));

    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "mystery = 1\n").unwrap();
    let rejected = mfsc(&["dim-probe", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&rejected), 2);
    assert!(stderr_of(&rejected).contains("unknown key"));
}

#[test]
fn reruns_are_byte_identical() {
    let args = [
        "dim-probe",
        "--machine",
        &machine("alternation.mfsc"),
        "--direction",
        "g2c",
        "--seq",
        "iid:9",
        "--k-grid",
        "2",
        "--s-grid",
        "1/2,1",
        "--n-grid",
        "32,128",
    ];
    let first = mfsc(&args);
    let second = mfsc(&args);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(code(&first), code(&second));

    let verify_args = ["verify", "--suite", "suffix-ratio", "--seed", "11"];
    let v1 = mfsc(&verify_args);
    let v2 = mfsc(&verify_args);
    assert_eq!(v1.stdout, v2.stdout);
}

#[test]
fn bad_machine_file_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.mfsc");
    fs::write(&path, "mfsc-machine v1\nkind: compressor\nalphabet: 0,1\nheads: one\n").unwrap();
    let out =
        mfsc(&["simulate", "--machine", path.to_str().unwrap(), "--seq", "periodic:0", "--n", "1"]);
    assert_eq!(code(&out), 2);
    assert!(stderr_of(&out).contains("line 4"), "got: {}", stderr_of(&out));
}
