//! Command-line behaviour: outputs, schemas, determinism and exit codes.

mod common;

use std::process::Command;

use common::{assert_schema, run_cli};
use serde_json::Value;
use vp_critical::cli::{format_sig, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, EXIT_VERIFY_FAILED};

fn json(args: &[&str]) -> Value {
    let mut a = args.to_vec();
    a.push("--json");
    let (code, out, err) = run_cli(&a);
    assert_eq!(code, EXIT_OK, "{err}");
    serde_json::from_str(&out).unwrap()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|x| x.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn polytrope_command() {
    let v = json(&["polytrope", "--n", "1"]);
    assert_schema("polytrope", &v);
    assert!((v["xi_n"].as_f64().unwrap() - std::f64::consts::PI).abs() < 1e-8);
    assert!((v["slope"].as_f64().unwrap() + std::f64::consts::FRAC_1_PI).abs() < 1e-8);
    let v = json(&["polytrope", "--n", "3"]);
    assert!((v["slope_product"].as_f64().unwrap() - 2.018236).abs() < 1e-5);

    let (code, _, err) = run_cli(&["polytrope", "--n", "5"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("closed form"));
    let (code, _, _) = run_cli(&["polytrope", "--n", "-1"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn polytrope_profile_dump() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("profile.csv");
    let (code, _, _) = run_cli(&["polytrope", "--n", "0", "--profile", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let text = std::fs::read_to_string(&path).unwrap();
    let (header, rows) = csv_rows(&text);
    assert_eq!(header, ["xi", "theta", "dtheta"]);
    assert_eq!(rows[0], ["0", "1", "0"]);
    for r in &rows {
        let (x, t, d) = (num(&r[0]), num(&r[1]), num(&r[2]));
        assert!((t - (1.0 - x * x / 6.0)).abs() < 1e-9);
        assert!((d + x / 3.0).abs() < 1e-9);
    }
    let last = rows.last().unwrap();
    assert!((num(&last[0]) - 6f64.sqrt()).abs() < 1e-9);
}

#[test]
fn critical_command() {
    let v = json(&["critical", "--beta", "1.5"]);
    assert_schema("critical", &v);
    assert_eq!(v["source"], "endpoint");
    assert!((v["critical_constant"].as_f64().unwrap() - 0.367019).abs() < 1e-6);

    let v = json(&["critical", "--beta", "inf"]);
    assert_schema("critical", &v);
    assert_eq!(v["beta"], "inf");
    assert!((v["critical_constant"].as_f64().unwrap() - 0.077383).abs() < 1e-5);

    let v = json(&["critical", "--beta", "2"]);
    assert_schema("critical", &v);
    let c = v["critical_constant"].as_f64().unwrap();
    assert!(v["lower_kz"].as_f64().unwrap() <= c && c <= v["upper_kz"].as_f64().unwrap());

    let v = json(&["critical", "--beta", "1000"]);
    assert_schema("critical", &v);
    assert!(v["r_beta"].is_null());

    let (code, out, _) = run_cli(&["critical", "--beta", "2"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("C_beta") && out.contains("0.24275483316"));

    for bad in ["1.2", "1.4999", "-3", "nan"] {
        let (code, _, err) = run_cli(&["critical", "--beta", bad]);
        assert_eq!(code, EXIT_USAGE, "{bad}: {err}");
    }
    let (_, _, err) = run_cli(&["critical", "--beta", "1.2"]);
    assert!(err.contains("C_beta = 0"));
}

#[test]
fn sweep_command() {
    let (code, out, err) = run_cli(&["sweep"]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(!out.contains('\r'));
    let (header, rows) = csv_rows(&out);
    assert_eq!(
        header.join(","),
        "beta,n,xi_n,slope_product,R_beta,C_beta,lower_kz,upper_kz,upper_improved,source"
    );
    assert_eq!(rows.len(), 100);
    assert_eq!(num(&rows[0][0]), 1.51);
    assert_eq!(num(&rows[99][0]), 10.0);
    let mut prev_beta = 0.0;
    let mut prev_c = f64::INFINITY;
    for r in &rows {
        let (b, c) = (num(&r[0]), num(&r[5]));
        assert!(b > prev_beta && c < prev_c);
        assert!(num(&r[6]) <= c + 1e-9 && c <= num(&r[7]) + 1e-9);
        assert!(c <= num(&r[8]) + 1e-9);
        assert_eq!(r[9], "exact");
        prev_beta = b;
        prev_c = c;
    }

    let (_, out, _) = run_cli(&[
        "sweep",
        "--beta-min",
        "1.501",
        "--beta-max",
        "1.51",
        "--points",
        "2",
        "--spacing",
        "linear",
    ]);
    let (_, rows) = csv_rows(&out);
    assert_eq!(rows[0][9], "asymptotic");
    assert_eq!(rows[1][9], "exact");

    let v = json(&[
        "sweep",
        "--beta-min",
        "1.5",
        "--beta-max",
        "3",
        "--points",
        "12",
    ]);
    assert_schema("sweep", &v);
    assert_eq!(v["rows"][0]["source"], "endpoint");

    for args in [
        ["sweep", "--beta-min", "1.4"].as_slice(),
        ["sweep", "--beta-max", "1.51"].as_slice(),
        ["sweep", "--points", "1"].as_slice(),
    ] {
        assert_eq!(run_cli(args).0, EXIT_USAGE, "{args:?}");
    }
}

#[test]
fn sweep_is_deterministic_and_written_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert_eq!(run_cli(&["sweep", "--out", a.to_str().unwrap()]).0, EXIT_OK);
    assert_eq!(run_cli(&["sweep", "--out", b.to_str().unwrap()]).0, EXIT_OK);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let bad = dir.path().join("missing").join("x.csv");
    let (code, _, err) = run_cli(&["sweep", "--out", bad.to_str().unwrap()]);
    assert_ne!(code, EXIT_OK);
    assert!(!err.is_empty());
}

#[test]
fn verify_command() {
    let (code, out, _) = run_cli(&["verify", "--beta", "2"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("pass = true"));
    let v = json(&["verify", "--beta", "2"]);
    assert_schema("verify", &v);
    assert_eq!(v["pass"], true);

    let (code, _, _) = run_cli(&["verify", "--beta", "2", "--tol-rel", "1e-4"]);
    assert_eq!(code, EXIT_OK);

    let (code, _, err) = run_cli(&["verify", "--beta", "1.2"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("3/2"));
}

#[test]
fn numerical_failure_exit_code() {
    let (code, _, err) = run_cli(&["polytrope", "--n", "3", "--max-steps", "5"]);
    assert_eq!(code, EXIT_NUMERICAL, "{err}");
    assert!(err.contains("budget"));
    let (code, _, _) = run_cli(&["verify", "--beta", "2", "--max-steps", "20"]);
    assert_eq!(code, EXIT_NUMERICAL);
    let (code, _, _) = run_cli(&["critical", "--beta", "2", "--tol-rel", "-1"]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = run_cli(&["critical", "--beta", "2", "--max-steps", "0"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn failing_verification_exit_code() {
    // a coarse absolute target corrupts the profile without relaxing thresholds
    let (code, out, err) = run_cli(&["verify", "--beta", "2", "--tol-abs", "1e-3"]);
    assert_eq!(code, EXIT_VERIFY_FAILED);
    assert!(out.contains("FAIL") && out.contains("pass = false"));
    assert!(err.contains("mass"));
}

#[test]
fn asymptotics_command() {
    let (code, out, err) = run_cli(&["asymptotics"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, ["beta", "C_exact", "C_asymptotic", "rel_gap"]);
    assert_eq!(num(&rows[0][0]), 1.5);
    assert_eq!(num(&rows[0][3]), 0.0);
    let gaps: Vec<f64> = rows.iter().map(|r| num(&r[3]).abs()).collect();
    assert!(gaps.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(num(&rows.last().unwrap()[0]), 2.0);

    // parse(emit(x)) = x at the emitted precision
    for r in &rows {
        for cell in r {
            assert_eq!(&format_sig(num(cell), 12), cell);
        }
    }

    let v = json(&["asymptotics", "--beta-max", "1.8", "--points", "5"]);
    assert_schema("asymptotics", &v);
    assert_eq!(run_cli(&["asymptotics", "--beta-max", "1.5"]).0, EXIT_USAGE);
}

#[test]
fn bounds_command() {
    let v = json(&["bounds"]);
    assert_schema("bounds", &v);
    assert!((v["plateau"].as_f64().unwrap() - 0.20269).abs() < 5e-4);
    let rows = v["rows"].as_array().unwrap();
    for r in rows {
        let lo = r["lower_kz"].as_f64().unwrap();
        let up = r["upper_kz"].as_f64().unwrap();
        let imp = r["upper_improved"].as_f64().unwrap();
        assert!(lo <= imp + 1e-12 && imp <= up + 1e-12);
    }
    let (code, out, _) = run_cli(&["bounds", "--points", "3"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("beta,lower_kz,upper_kz,upper_improved\n"));
}

#[test]
fn usage_errors() {
    assert_eq!(run_cli(&[]).0, EXIT_USAGE);
    assert_eq!(run_cli(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(run_cli(&["critical"]).0, EXIT_USAGE);
    assert_eq!(run_cli(&["critical", "--beta", "two"]).0, EXIT_USAGE);
    let (code, out, _) = run_cli(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("sweep"));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_vp-critical");
    let ok = Command::new(bin)
        .args(["critical", "--beta", "2"])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(EXIT_OK));
    let bad = Command::new(bin)
        .args(["critical", "--beta", "1.2"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_USAGE));
    let verify = Command::new(bin)
        .args(["verify", "--beta", "3", "--json"])
        .output()
        .unwrap();
    assert_eq!(verify.status.code(), Some(EXIT_OK));
    let v: Value = serde_json::from_slice(&verify.stdout).unwrap();
    assert_schema("verify", &v);
}
