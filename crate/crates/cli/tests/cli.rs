use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn kplane(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kplane"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

/// Every file in the directory except the manifest is listed by it.
fn assert_manifest_complete(dir: &Path) {
    let m = manifest(dir);
    let mut listed: Vec<String> = m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    let mut present: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    listed.sort();
    present.sort();
    assert_eq!(listed, present);
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert!(m["wall_time_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn help_on_every_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    for sub in [
        "admissibility",
        "kernels",
        "constant",
        "radon",
        "norms",
        "reconstruct",
        "report",
    ] {
        let o = kplane(tmp.path(), &[sub, "--help"]);
        assert_eq!(code(&o), 0, "{sub}");
        assert!(String::from_utf8_lossy(&o.stdout).contains("--out-dir"));
    }
    assert_eq!(code(&kplane(tmp.path(), &["--help"])), 0);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&kplane(tmp.path(), &["constant", "--bogus"])), 2);
    assert_eq!(code(&kplane(tmp.path(), &["constant"])), 2);
}

#[test]
fn admissibility_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = tmp.path().join("ok");
    let o = kplane(&ok, &["admissibility", "--n", "3", "--k", "2"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["passed"], true);
    assert_manifest_complete(&ok);

    let gauss = write(
        tmp.path(),
        "gauss.json",
        r#"{"n": 3, "k": 2, "wavelet": {"kind": "profile",
            "profile": {"kind": "gaussian_poly", "coeffs": [1.0], "scale": 1.0, "dim": 1}}}"#,
    );
    let bad = tmp.path().join("bad");
    let o = kplane(
        &bad,
        &["--config", gauss.to_str().unwrap(), "admissibility"],
    );
    assert_eq!(code(&o), 1);
    assert_eq!(stdout_json(&o)["passed"], false);

    let missing = tmp.path().join("missing");
    let o = kplane(
        &missing,
        &["--config", "/no/such/file.json", "admissibility"],
    );
    assert_eq!(code(&o), 2);
    // the failed run still leaves its manifest
    assert_eq!(manifest(&missing)["exit_code"], 2);
    assert!(manifest(&missing)["outputs"].as_array().unwrap().is_empty());
}

#[test]
fn constant_routes_and_branches() {
    let tmp = tempfile::tempdir().unwrap();
    for (k, branch) in [("1", "k_odd_moment"), ("2", "k_even_log_moment")] {
        let dir = tmp.path().join(k);
        let o = kplane(&dir, &["constant", "--n", "3", "--k", k]);
        assert_eq!(code(&o), 0);
        let s = stdout_json(&o);
        assert!(s["relative_gap"].as_f64().unwrap() <= 1e-5);
        assert_eq!(s["branch"], branch);
        assert_eq!(s["degenerate"], false);
    }

    let zero = write(
        tmp.path(),
        "zero.json",
        r#"{"n": 3, "k": 1, "wavelet": {"kind": "profile",
            "profile": {"kind": "gaussian_poly", "coeffs": [0.0], "scale": 1.0, "dim": 2}}}"#,
    );
    let o = kplane(
        &tmp.path().join("z"),
        &["--config", zero.to_str().unwrap(), "constant"],
    );
    assert_eq!(code(&o), 0);
    let s = stdout_json(&o);
    assert_eq!(s["degenerate"], true);
    assert_eq!(s["c_routeA"], 0.0);

    let gauss = write(
        tmp.path(),
        "gauss.json",
        r#"{"n": 3, "k": 1, "wavelet": {"kind": "profile",
            "profile": {"kind": "gaussian_poly", "coeffs": [1.0], "scale": 1.0, "dim": 2}}}"#,
    );
    let o = kplane(
        &tmp.path().join("g"),
        &["--config", gauss.to_str().unwrap(), "constant"],
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn kernels_table() {
    let tmp = tempfile::tempdir().unwrap();
    let o = kplane(
        tmp.path(),
        &["kernels", "--n", "3", "--k", "2", "--points", "5"],
    );
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(tmp.path().join("kernels.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "r,psi,lambda,tilde_psi");
    assert_eq!(lines.len(), 6);
    assert!(!csv.contains('\r'));
    let s = stdout_json(&o);
    for key in ["c_routeA", "c_routeB", "c_routeC", "majorant_l1"] {
        assert!(s[key].is_number(), "{key}");
    }
    assert_manifest_complete(tmp.path());
}

#[test]
fn radon_divergence_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let div = tmp.path().join("div");
    let o = kplane(
        &div,
        &[
            "radon",
            "--phantom",
            "solmon",
            "--p",
            "2",
            "--n",
            "2",
            "--k",
            "1",
        ],
    );
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverge"));
    assert_eq!(manifest(&div)["exit_code"], 3);

    let fine = tmp.path().join("fine");
    let o = kplane(
        &fine,
        &[
            "radon",
            "--phantom",
            "solmon",
            "--p",
            "1",
            "--n",
            "2",
            "--k",
            "1",
            "--points",
            "3",
        ],
    );
    assert_eq!(code(&o), 0);
}

#[test]
fn radon_gaussian_sinogram() {
    let tmp = tempfile::tempdir().unwrap();
    let o = kplane(
        tmp.path(),
        &[
            "radon",
            "--phantom",
            "gaussian",
            "--n",
            "3",
            "--k",
            "2",
            "--points",
            "4",
        ],
    );
    assert_eq!(code(&o), 0);
    let mut rd = csv::Reader::from_path(tmp.path().join("sinogram.csv")).unwrap();
    assert_eq!(rd.headers().unwrap(), vec!["s", "fhat"]);
    for rec in rd.records() {
        let rec = rec.unwrap();
        let s: f64 = rec[0].parse().unwrap();
        let fhat: f64 = rec[1].parse().unwrap();
        let exact = std::f64::consts::PI * (-s * s).exp();
        assert!((fhat - exact).abs() <= 1e-8 * exact, "s = {s}");
    }
}

#[test]
fn norms_from_csv_and_json() {
    let tmp = tempfile::tempdir().unwrap();
    let cells = data("cells.csv");
    let o = kplane(
        &tmp.path().join("a"),
        &[
            "norms",
            "--space",
            "lp:2",
            "--input",
            cells.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&o), 0);
    let s = stdout_json(&o);
    assert_eq!(s["space"], "lp:2");
    // unit cells holding 1, 2, 3, 4
    assert!((s["norm"].as_f64().unwrap() - 30f64.sqrt()).abs() < 1e-12);

    let exp = data("exponent.json");
    let space = format!("varexp:{}", exp.display());
    let o = kplane(
        &tmp.path().join("b"),
        &[
            "norms",
            "--space",
            &space,
            "--input",
            cells.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&o), 0);
    assert!(stdout_json(&o)["norm"].as_f64().unwrap() > 0.0);

    let grid = write(
        tmp.path(),
        "grid.json",
        r#"{"center": [0.0], "half_width": [1.0], "cells": [2], "values": [3.0, -4.0]}"#,
    );
    let o = kplane(
        &tmp.path().join("c"),
        &[
            "norms",
            "--space",
            "lorentz:2,inf",
            "--input",
            grid.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&o), 0);

    let o = kplane(
        &tmp.path().join("d"),
        &[
            "norms",
            "--space",
            "lp:0.5",
            "--input",
            grid.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&o), 2);
}

fn golden_run(dir: &Path, threads: &str) {
    let cfg = data("golden_recon.json");
    let o = kplane(
        dir,
        &[
            "--threads",
            threads,
            "--config",
            cfg.to_str().unwrap(),
            "reconstruct",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn golden_reconstruction_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let one = tmp.path().join("t1");
    let four = tmp.path().join("t4");
    golden_run(&one, "1");
    golden_run(&four, "4");
    for (name, golden) in [
        ("report.csv", "golden_report.csv"),
        ("probes.csv", "golden_probes.csv"),
    ] {
        let a = fs::read(one.join(name)).unwrap();
        let b = fs::read(four.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs across thread counts");
        assert_eq!(
            a,
            fs::read(data(golden)).unwrap(),
            "{name} differs from golden"
        );
        assert!(!a.contains(&b'\r'));
    }
    assert_manifest_complete(&one);
    assert_eq!(manifest(&one)["seed"], 7);

    // report reads the run back and judges monotonicity
    let rep = tmp.path().join("rep");
    let o = kplane(&rep, &["report", "--input", one.to_str().unwrap()]);
    let s = stdout_json(&o);
    let expected = if s["all_strictly_decreasing"] == true {
        0
    } else {
        1
    };
    assert_eq!(code(&o), expected);
    assert_manifest_complete(&rep);
}

#[test]
fn seed_flag_changes_monte_carlo_only() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = data("golden_recon.json");
    let a = tmp.path().join("a");
    let o = kplane(
        &a,
        &[
            "--seed",
            "99",
            "--config",
            cfg.to_str().unwrap(),
            "reconstruct",
        ],
    );
    assert_eq!(code(&o), 0);
    assert_eq!(manifest(&a)["seed"], 99);
    // norm errors come from the deterministic fast path
    assert_eq!(
        fs::read(a.join("report.csv")).unwrap(),
        fs::read(data("golden_report.csv")).unwrap()
    );
    assert_ne!(
        fs::read(a.join("probes.csv")).unwrap(),
        fs::read(data("golden_probes.csv")).unwrap()
    );
}

#[test]
fn reconstruct_rejects_bad_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.json", r#"{"n": 2}"#);
    let o = kplane(
        &tmp.path().join("out"),
        &["--config", cfg.to_str().unwrap(), "reconstruct"],
    );
    assert_eq!(code(&o), 2);
}
