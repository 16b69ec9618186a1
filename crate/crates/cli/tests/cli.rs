use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pascal_core::bench::{generate, RsaParams};
use pascal_core::report::ReportDocument;

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn pascal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pascal"))
        .args(args)
        .env_remove("PASCAL_SOLVER_CMD")
        .output()
        .expect("spawn pascal")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn run_in(dir: &Path, verb: &str, file: &Path, extra: &[&str]) -> Output {
    let mut args = vec![verb, file.to_str().unwrap(), "--out-dir", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    pascal(&args)
}

#[test]
fn corpus_rsa_files_match_generator() {
    for n in [8, 12, 16] {
        let on_disk = std::fs::read_to_string(corpus(&format!("rsa{n}.mhdl"))).unwrap();
        assert_eq!(on_disk, generate(&RsaParams::new(n)).unwrap(), "rsa{n}.mhdl is stale");
    }
}

#[test]
fn golden_exit_codes() {
    // (file, check, enumerate, harden, verify on the hardened output)
    let table: &[(&str, i32, i32, i32, Option<i32>)] = &[
        ("const5.mhdl", 0, 0, 0, None),
        ("pwcheck.mhdl", 2, 2, 0, Some(0)),
        ("pubdelay.mhdl", 2, 0, 0, Some(0)),
        ("secret_data.mhdl", 2, 0, 0, Some(0)),
        ("rsa8.mhdl", 2, 2, 0, Some(0)),
        ("rsa12.mhdl", 2, 2, 0, Some(0)),
        ("rsa16.mhdl", 2, 2, 0, Some(0)),
    ];
    let tmp = tempfile::tempdir().unwrap();
    for &(name, chk, enm, hard, ver) in table {
        let file = corpus(name);
        let stem = name.trim_end_matches(".mhdl");
        let o = pascal(&["check", file.to_str().unwrap()]);
        assert_eq!(code(&o), chk, "check {name}");
        let o = run_in(tmp.path(), "enumerate", &file, &[]);
        assert_eq!(code(&o), enm, "enumerate {name}: {}", String::from_utf8_lossy(&o.stderr));
        let o = run_in(tmp.path(), "harden", &file, &["--samples", "200"]);
        assert_eq!(code(&o), hard, "harden {name}: {}", String::from_utf8_lossy(&o.stderr));
        let hardened = tmp.path().join(format!("{stem}_hardened.mhdl"));
        match ver {
            Some(want) => {
                let report = tmp.path().join(format!("{stem}.report.json"));
                let o = pascal(&["verify", hardened.to_str().unwrap(), "--report", report.to_str().unwrap()]);
                assert_eq!(code(&o), want, "verify {name}: {}", stdout(&o));
            }
            None => assert!(!hardened.exists(), "{name} has no path but was hardened"),
        }
    }
}

#[test]
fn enumerate_rsa8_report() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(tmp.path(), "enumerate", &corpus("rsa8.mhdl"), &["--bound", "32"]);
    assert_eq!(code(&o), 2);
    let text = std::fs::read_to_string(tmp.path().join("rsa8.report.json")).unwrap();
    let doc = ReportDocument::from_json(&text).unwrap();
    let t = doc.timing.unwrap();
    assert_eq!(t.latencies(), (9..=16).collect());
    assert!(t.exhausted);
    assert_eq!(doc.compensator.unwrap().t_max, 16);
    let csv = std::fs::read_to_string(tmp.path().join("rsa8.timing.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
}

#[test]
fn verify_original_rsa8_finds_channel() {
    let o = pascal(&["verify", corpus("rsa8.mhdl").to_str().unwrap(), "--bound", "40"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn harden_from_report_skips_enumeration() {
    let tmp = tempfile::tempdir().unwrap();
    let file = corpus("rsa8.mhdl");
    assert_eq!(code(&run_in(tmp.path(), "enumerate", &file, &[])), 2);
    let report = tmp.path().join("rsa8.report.json");
    let out = tmp.path().join("again");
    let o = run_in(&out, "harden", &file, &["--report", report.to_str().unwrap(), "--samples", "100"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!stdout(&o).contains("classes:"), "report path re-enumerated");
    let o = pascal(&["verify", out.join("rsa8_hardened.mhdl").to_str().unwrap(), "--bound", "40"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("one class at 16"));

    // a report for a different source is refused
    let o = run_in(&out, "harden", &corpus("rsa12.mhdl"), &["--report", report.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn trace_files_per_class() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(tmp.path(), "enumerate", &corpus("pwcheck.mhdl"), &["--trace"]);
    assert_eq!(code(&o), 2);
    for lat in 1..=8 {
        let dump = std::fs::read_to_string(tmp.path().join(format!("pwcheck.class{lat}.trace"))).unwrap();
        assert!(dump.contains(&format!("{lat} done 0x1")), "class {lat}:\n{dump}");
    }
}

#[test]
fn instrumented_engine_and_pins() {
    let tmp = tempfile::tempdir().unwrap();
    let file = corpus("pwcheck.mhdl");
    let o = run_in(tmp.path(), "enumerate", &file, &["--engine", "instrumented", "--pin", "guess=0xff"]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("classes: 8 [1 2 3 4 5 6 7 8]"), "{}", stdout(&o));
    let o = run_in(tmp.path(), "enumerate", &file, &["--pin", "pw=1"]);
    assert_eq!(code(&o), 1);
    let o = run_in(tmp.path(), "enumerate", &file, &["--pin", "guess"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn external_solver_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cmd = format!("{} sat", env!("CARGO_BIN_EXE_pascal"));
    let o = run_in(tmp.path(), "enumerate", &corpus("rsa8.mhdl"), &["--solver-cmd", &cmd]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("classes: 8 [9 10 11 12 13 14 15 16] (exhausted"), "{}", stdout(&o));
    let o = run_in(tmp.path(), "enumerate", &corpus("secret_data.mhdl"), &["--solver-cmd", &cmd]);
    assert_eq!(code(&o), 0);
}

#[test]
fn sat_verb_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let sat = tmp.path().join("sat.cnf");
    std::fs::write(&sat, "p cnf 2 2\n1 2 0\n-1 0\n").unwrap();
    let o = pascal(&["sat", sat.to_str().unwrap()]);
    assert_eq!(code(&o), 10);
    assert!(stdout(&o).contains("s SATISFIABLE"));
    assert!(stdout(&o).contains("-1 2"));
    let unsat = tmp.path().join("unsat.cnf");
    std::fs::write(&unsat, "p cnf 1 2\n1 0\n-1 0\n").unwrap();
    assert_eq!(code(&pascal(&["sat", unsat.to_str().unwrap()])), 20);
}

#[test]
fn sidecar_pragmas_override_source() {
    let tmp = tempfile::tempdir().unwrap();
    let side = tmp.path().join("p.pragmas");
    // the sidecar moves the secret from key to ct
    std::fs::write(&side, "# only ct is secret\n@secret ct\n").unwrap();
    let o = pascal(&["check", corpus("rsa8.mhdl").to_str().unwrap(), "--pragmas", side.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("tainted observables: pt"), "{}", stdout(&o));
}

#[test]
fn malformed_inputs_are_errors_not_crashes() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: &[(&str, &[u8])] = &[
        ("syntax.mhdl", b"module m(input a"),
        ("binary.mhdl", b"\x00\xff\xfe"),
        ("nobound.mhdl", b"// @start s\n// @done d\nmodule m(input clk, input rst, input s, output d);\nassign d = s;\nendmodule\n"),
        ("empty.mhdl", b""),
    ];
    for (name, text) in cases {
        let p = tmp.path().join(name);
        std::fs::write(&p, text).unwrap();
        let o = run_in(tmp.path(), "enumerate", &p, &[]);
        assert_eq!(code(&o), 1, "{name}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"), "{name}");
    }
    assert_eq!(code(&pascal(&["check", "/nonexistent/x.mhdl"])), 1);
    let bad = tmp.path().join("bad.cnf");
    std::fs::write(&bad, "1 2 0\n").unwrap();
    assert_eq!(code(&pascal(&["sat", bad.to_str().unwrap()])), 1);
    assert_eq!(code(&pascal(&["bench", "rsa", "--bits", "2", "--out-dir", tmp.path().to_str().unwrap()])), 1);
}
