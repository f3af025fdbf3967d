use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ksmild(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ksmild"))
        .args(args)
        .current_dir(dir)
        .env_remove("KSMILD_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn solve_writes_manifest_and_converges() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ksmild(
        tmp.path(),
        &[
            "solve",
            "--dim",
            "1",
            "--L",
            "3.14159",
            "--N",
            "32",
            "--fixture",
            "cos1",
            "--pair",
            "Y",
            "--out",
            "s",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let m = manifest(&tmp.path().join("s"));
    assert_eq!(m["status"], "ok");
    assert_eq!(m["constants"]["caseA"], true);
    assert!(m["solve"]["residual"].as_f64().unwrap() <= 1e-10);
    for f in m["files"].as_array().unwrap() {
        assert!(
            tmp.path().join("s").join(f.as_str().unwrap()).exists(),
            "{f}"
        );
    }
}

#[test]
fn rerun_from_manifest_is_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let first = ksmild(
        tmp.path(),
        &[
            "solve",
            "--L",
            "2.5",
            "--N",
            "12",
            "--random-seed",
            "11",
            "--steps",
            "200",
            "--eta-fraction",
            "0.5",
            "--out",
            "a",
        ],
    );
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let again = ksmild(
        tmp.path(),
        &["run", "--config", "a/manifest.json", "--out", "b"],
    );
    assert!(
        again.status.success(),
        "{}",
        String::from_utf8_lossy(&again.stderr)
    );
    let files = manifest(&tmp.path().join("a"))["files"].clone();
    for f in files.as_array().unwrap() {
        let name = f.as_str().unwrap();
        if name == "manifest.json" {
            continue;
        }
        let a = fs::read(tmp.path().join("a").join(name)).unwrap();
        let b = fs::read(tmp.path().join("b").join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
}

#[test]
fn norms_of_a_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("f.csv"), "k1,re,im\n-1,1,0\n1,1,0\n").unwrap();
    let out = ksmild(
        tmp.path(),
        &[
            "norms",
            "--L",
            "6.283185307179586",
            "--input",
            "f.csv",
            "--norms",
            "Y[-1],PM[-0.25]",
            "--out",
            "n",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let norms: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("n/norms.json")).unwrap())
            .unwrap();
    assert_eq!(norms["Y[-1]"].as_f64(), Some(2.0));
    assert_eq!(norms["PM[-0.25]"].as_f64(), Some(1.0));
}

#[test]
fn error_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    // period >= 2 pi without a horizon
    let out = ksmild(tmp.path(), &["solve", "--L", "7", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["exit_code"], 2);

    // data far too large for the contraction gate
    let out = ksmild(
        tmp.path(),
        &[
            "solve",
            "--L",
            "3",
            "--fixture",
            "cos1",
            "--norm",
            "5",
            "--out",
            "g",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(manifest(&tmp.path().join("g"))["status"], "gate");

    let out = ksmild(tmp.path(), &["run", "--config", "missing.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_and_solve_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let common = [
        "--L",
        "3",
        "--N",
        "16",
        "--fixture",
        "cos1",
        "--steps",
        "500",
    ];
    let mut solve = vec!["solve", "--out", "s"];
    solve.extend(common);
    let mut oracle = vec!["oracle", "--dt", "1e-4", "--out", "o"];
    oracle.extend(common);
    assert!(ksmild(tmp.path(), &solve).status.success());
    assert!(ksmild(tmp.path(), &oracle).status.success());
    let read = |d: &str| {
        ksmild::snapshot::load_snapshot(&tmp.path().join(d).join("final.csv"), None).unwrap()
    };
    let (a, b) = (read("s"), read("o"));
    let rel = a.sub(&b).unwrap().l2_norm() / b.l2_norm();
    assert!(rel < 1e-6, "{rel}");
}

#[test]
fn gate_fraction_sizes_weighted_data() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ksmild(
        tmp.path(),
        &[
            "solve-weighted",
            "--L",
            "5",
            "--N",
            "16",
            "--weight",
            "fourth-root",
            "--weight-param",
            "1",
            "--gate-fraction",
            "0.9",
            "--out",
            "w",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let m = manifest(&tmp.path().join("w"));
    let product = m["solve"]["gate"]["product"].as_f64().unwrap();
    assert!((product - 0.9).abs() < 1e-12, "{product}");
    // the default tolerance leaves too few shells for a fit, which is recorded
    assert!(m["radius"]["skipped"].is_string());
}
