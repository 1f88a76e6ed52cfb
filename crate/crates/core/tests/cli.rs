//! End-to-end runs of the binary: exit codes, golden JSON reports and output
//! plumbing. Set `UPDATE_GOLDEN=1` to rewrite the files under `tests/golden`.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hadamard-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn golden(name: &str, args: &[&str], expected_code: i32) {
    let out = run(args);
    assert_eq!(
        code(&out),
        expected_code,
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{name}.json"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &out.stdout).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("missing {}; rerun with UPDATE_GOLDEN=1", path.display()));
    assert_eq!(String::from_utf8_lossy(&out.stdout), want, "{name} drifted");
}

#[test]
fn golden_coord_convex_squared_product() {
    let args = [
        "verify",
        "--chain",
        "coord-convex",
        "--f",
        "x^2*y^2",
        "--domain",
        "0,1,0,1",
        "--format",
        "json",
    ];
    golden("verify_coord_convex_x2y2", &args, 0);
    let doc = json(&run(&args));
    assert_eq!(doc["schema"], "hadamard-lab/1");
    assert_eq!(doc["command"], "verify");
    let want = [1.0 / 16.0, 1.0 / 12.0, 1.0 / 9.0, 1.0 / 6.0, 0.25];
    let terms = doc["result"]["terms"].as_array().unwrap();
    assert_eq!(terms.len(), 5);
    for (t, w) in terms.iter().zip(want) {
        let v = t["value"].as_f64().unwrap();
        assert!((v - w).abs() <= 1e-12, "{v} vs {w}");
    }
    assert_eq!(doc["result"]["verdict"], "holds");
}

#[test]
fn golden_sqrt_not_convex() {
    let args = [
        "check-class",
        "--f",
        "sqrt(x)",
        "--domain",
        "0,1",
        "--class",
        "convex",
        "--format",
        "json",
    ];
    golden("check_class_sqrt_convex", &args, 1);
    let doc = json(&run(&args));
    assert_eq!(doc["result"]["verdict"], "violated");
    let w = &doc["result"]["witnesses"][0];
    assert!(w["violation"].as_f64().unwrap() >= 0.2);
}

#[test]
fn golden_corollary_audit() {
    let args = ["audit-corollary2", "--domain", "0,1", "--format", "json"];
    golden("audit_corollary2_unit", &args, 0);
    let doc = json(&run(&args));
    let pair = &doc["result"]["pairs"][0];
    assert_eq!(pair["stated"]["verdict"], "violated");
    assert_eq!(pair["corrected"]["verdict"], "holds");
}

#[test]
fn golden_fuzz_small() {
    golden(
        "fuzz_prod_1d",
        &[
            "fuzz", "--chain", "prod-1d", "--trials", "10", "--seed", "3", "--format", "json",
        ],
        0,
    );
}

#[test]
fn holds_exits_zero() {
    let out = run(&[
        "check-class",
        "--f",
        "x^2",
        "--domain",
        "0,1",
        "--class",
        "convex",
    ]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("holds-on-samples"));
}

#[test]
fn violated_chain_exits_one() {
    let out = run(&[
        "verify",
        "--chain",
        "hq-1d",
        "--f",
        "max(0, 1 - 16*abs(x - 0.5))",
        "--domain",
        "0,1",
        "--no-preconditions",
    ]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn singular_integrand_exits_two() {
    let out = run(&[
        "verify", "--chain", "hq-1d", "--f", "1/x", "--domain", "0,1", "--format", "json",
    ]);
    assert_eq!(code(&out), 2);
    assert_eq!(json(&out)["result"]["verdict"], "inconclusive");
}

#[test]
fn usage_errors_exit_64() {
    for args in [
        &["verify", "--chain", "nope", "--f", "x", "--domain", "0,1"][..],
        &["verify", "--chain", "hq-1d", "--f", "x^", "--domain", "0,1"],
        &["verify", "--chain", "hq-1d", "--f", "x", "--domain", "1,0"],
        &[
            "verify", "--chain", "coord-gl", "--f", "x*y", "--domain", "0,1",
        ],
        &[
            "check-class",
            "--f",
            "x",
            "--domain",
            "0,1",
            "--class",
            "convex",
            "--grid",
            "1",
        ],
        &[
            "fuzz",
            "--chain",
            "hq-1d",
            "--coef-min",
            "2",
            "--coef-max",
            "1",
        ],
        &["frobnicate"],
        &[],
    ] {
        let out = run(args);
        assert_eq!(
            code(&out),
            64,
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!out.stderr.is_empty(), "{args:?} printed nothing to stderr");
    }
}

#[test]
fn parse_errors_point_at_the_column() {
    let out = run(&[
        "verify", "--chain", "hq-1d", "--f", "x + * 2", "--domain", "0,1",
    ]);
    assert_eq!(code(&out), 64);
    let err = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<&str> = err.lines().collect();
    let caret = lines.iter().find(|l| l.trim() == "^").expect("caret line");
    let source = lines
        .iter()
        .find(|l| l.trim() == "x + * 2")
        .expect("echoed source");
    assert_eq!(caret.find('^').unwrap(), source.find('*').unwrap());
}

#[test]
fn help_and_version_exit_zero() {
    for flag in ["--help", "--version"] {
        let out = run(&[flag]);
        assert_eq!(code(&out), 0);
        assert!(!out.stdout.is_empty());
    }
    assert_eq!(code(&run(&["verify", "--help"])), 0);
}

#[test]
fn out_flag_writes_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let args = [
        "--format",
        "json",
        "--out",
        path.to_str().unwrap(),
        "verify",
        "--chain",
        "hq-1d",
        "--f",
        "x^2",
        "--domain",
        "0,1",
    ];
    let out = run(&args);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["result"]["chain"], "hq-1d");
}

#[test]
fn csv_and_text_formats() {
    let csv = run(&[
        "--format", "csv", "verify", "--chain", "coord-gl", "--f", "1", "--domain", "0,1,0,1",
    ]);
    assert_eq!(code(&csv), 0);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("section,index,label,value,error,converged,holds,inconclusive\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with("term,")).count(), 3);

    let plain = run(&[
        "verify", "--chain", "coord-gl", "--f", "1", "--domain", "0,1,0,1",
    ]);
    assert!(String::from_utf8(plain.stdout)
        .unwrap()
        .contains("verdict:  holds"));
}

#[test]
fn thread_count_does_not_change_output() {
    let args = [
        "fuzz",
        "--chain",
        "coord-convex",
        "--trials",
        "12",
        "--seed",
        "11",
        "--format",
        "json",
    ];
    let one = bin()
        .args(args)
        .env("HADAMARD_LAB_THREADS", "1")
        .output()
        .unwrap();
    let three = bin()
        .args(args)
        .env("HADAMARD_LAB_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, three.stdout);
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let out = bin()
        .args([
            "check-class",
            "--f",
            "x",
            "--domain",
            "0,1",
            "--class",
            "convex",
        ])
        .env("HADAMARD_LAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&out), 64);
}
