use std::process::Command;

use mco_cli::{run, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_VERIFICATION};
use serde_json::Value;

fn mco(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("mco").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn classify_forbidden_upward() {
    let (code, out, err) = mco(&["classify", "--p-in", "0.1", "--p-out", "0.3", "--p-beta", "0.25"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["verdict"], "forbidden");
    assert_eq!(v["bound"]["regime"], "A6");
    assert!(v["bound"]["probability"].as_f64().unwrap() > 0.0);
    assert!(err.contains("guaranteed loss"));
}

#[test]
fn classify_mixing() {
    let (code, out, _) = mco(&["classify", "--p-in", "0.3", "--p-out", "0.26", "--p-beta", "0.25"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["verdict"], "mixing");
    assert!((v["lambda"].as_f64().unwrap() - 0.8).abs() < 1e-12);
}

#[test]
fn classify_pure_excited_writes_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("reset.json");
    let (code, out, _) = mco(&[
        "classify",
        "--p-in",
        "1",
        "--p-out",
        "0.05",
        "--out",
        file.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("pure_excited"));
    let (code, csv, err) = mco(&["simulate", "--protocol", file.to_str().unwrap(), "--p-in", "1"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(csv, "work,probability\n1.0986122886681096,1\n");
    assert!(err.contains("final_p_excited=0.050000000000000003"));
}

#[test]
fn invalid_probability_is_a_validation_failure() {
    let (code, _, err) = mco(&["classify", "--p-in", "1.5", "--p-out", "0.2"]);
    assert_eq!(code, EXIT_VALIDATION);
    assert!(err.contains("p_in"));
}

#[test]
fn e0_and_p_beta_are_exclusive() {
    let (code, _, err) = mco(&["figure8", "--e0", "1", "--p-beta", "0.25"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("cannot be used with"));
    assert_eq!(mco(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(mco(&["--help"]).0, EXIT_OK);
}

#[test]
fn simulate_empty_protocol() {
    let (code, out, _) = mco(&["simulate"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, "work,probability\n0,1\n");
}

#[test]
fn simulate_thermalize_once_has_two_atoms() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("once.json");
    let e0 = 3f64.ln();
    std::fs::write(
        &file,
        format!(
            r#"{{"beta": 1.0, "e0": {e0}, "steps": [
                {{"type": "LT", "delta_e": -0.5}},
                {{"type": "PT", "lambda": 1.0}},
                {{"type": "LT", "delta_e": 0.5}}]}}"#
        ),
    )
    .unwrap();
    let (code, out, _) = mco(&["simulate", "--protocol", file.to_str().unwrap(), "--p-in", "0"]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert_eq!(out.lines().count(), 3);
    assert!(out.contains("\n-0.5,"));
}

#[test]
fn invalid_protocol_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("open.json");
    std::fs::write(
        &file,
        r#"{"beta": 1.0, "e0": 1.0, "steps": [{"type": "LT", "delta_e": 0.5}]}"#,
    )
    .unwrap();
    let (code, _, err) = mco(&["simulate", "--protocol", file.to_str().unwrap()]);
    assert_eq!(code, EXIT_VALIDATION);
    assert!(err.contains("open.json"));
    let (code, _, _) = mco(&["simulate", "--protocol", "/nonexistent/file.json"]);
    assert_eq!(code, EXIT_VALIDATION);
}

#[test]
fn monte_carlo_output_is_reproducible() {
    let args = [
        "simulate",
        "--p-in",
        "0.1",
        "--p-out",
        "0.3",
        "--stage2-steps",
        "20",
        "--samples",
        "1e6",
        "--seed",
        "7",
    ];
    let (code, a, _) = mco(&args);
    assert_eq!(code, EXIT_OK);
    let (_, b, _) = mco(&args);
    assert_eq!(a, b);
    assert!(a.starts_with("work,probability\n"));
}

#[test]
fn samples_must_be_a_positive_integer() {
    assert_eq!(mco(&["simulate", "--samples", "1.5e0"]).0, EXIT_USAGE);
    assert_eq!(mco(&["simulate", "--samples", "0"]).0, EXIT_USAGE);
    assert_eq!(mco_cli::parse_count("1e6"), Ok(1_000_000));
}

#[test]
fn simulate_json_summary() {
    let (code, out, _) = mco(&["simulate", "--p-in", "0.1", "--p-out", "0.3", "--format", "json"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["method"], "exact");
    assert!((v["final_p_excited"].as_f64().unwrap() - 0.3).abs() < 1e-12);
}

#[test]
fn figure8_columns() {
    let (code, out, _) = mco(&["figure8", "--points", "100"]);
    assert_eq!(code, EXIT_OK);
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "p_out,work_threshold,prob_pin_1_16,prob_pin_1_8,prob_pin_3_16"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 100);
    for r in &rows {
        assert_eq!(r[3], 2.0 * r[2]);
    }
    assert_eq!(rows[99][0], 0.5);
}

#[test]
fn bounds_against_average_work_protocol() {
    let (code, out, _) = mco(&["bounds", "--p-in", "0.1", "--p-out", "0.3", "--stage2-steps", "50"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["average_work"]["holds"], true);
    assert!((v["simplecase"]["probability"].as_f64().unwrap() - 2.3065e-3).abs() < 1e-6);
    let (code, _, _) = mco(&["bounds", "--p-in", "0.3", "--p-out", "0.26"]);
    assert_eq!(code, EXIT_VALIDATION);
}

#[test]
fn verify_reports_and_fault_injection() {
    let (code, out, _) = mco(&["verify", "--cases", "20", "--seed", "3"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["cases"], 20);
    let (code, out, err) = mco(&["verify", "--cases", "20", "--inject-fault", "hoeffding"]);
    assert_eq!(code, EXIT_VERIFICATION);
    assert!(err.contains("hoeffding"));
    let v: Value = serde_json::from_str(&out).unwrap();
    let failed: Vec<&str> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["status"] == "fail")
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["hoeffding"]);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_mco");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(status(&["classify", "--p-in", "0.1", "--p-out", "0.3"]), Some(0));
    assert_eq!(status(&["classify", "--p-in", "0.1"]), Some(1));
    assert_eq!(status(&["classify", "--p-in=-1", "--p-out", "0.3"]), Some(2));
}
