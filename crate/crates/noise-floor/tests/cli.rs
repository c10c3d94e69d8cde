use std::path::Path;
use std::process::{Command, Output};

use noise_floor::cli::EstimateOutput;
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_noise-floor"));
    c.env_remove("NOISE_FLOOR_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, content: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, content).unwrap();
    p.to_str().unwrap().to_string()
}

/// Deterministic small regression problem as CSV text.
fn regression_csv(n: usize, p: usize) -> (String, String) {
    let mut x = String::from((0..p).map(|j| format!("x{j}")).collect::<Vec<_>>().join(",") + "\n");
    let mut y = String::from("y\n");
    for i in 0..n {
        let row: Vec<f64> = (0..p).map(|j| (((i * 7 + j * 13) % 17) as f64 - 8.0) / (j + 1) as f64).collect();
        let signal: f64 = row.iter().enumerate().map(|(j, v)| v * 0.3 / (j + 1) as f64).sum();
        let noise = (((i * 31 + 11) % 23) as f64 - 11.0) / 11.0;
        x += &(row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",") + "\n");
        y += &format!("{}\n", signal + noise);
    }
    (x, y)
}

#[test]
fn estimate_emits_documented_schema() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = regression_csv(60, 6);
    let xp = write(dir.path(), "X.csv", &x);
    let yp = write(dir.path(), "y.csv", &y);
    let out = run(&["-q", "estimate", "--x", &xp, "--y", &yp, "--family", "tikhonov"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["sigma2_hat", "alpha_hat", "epsilon", "family", "diagnostics", "warnings"] {
        assert!(v.get(key).is_some(), "missing key {key}");
    }
    assert_eq!(v["epsilon"].as_f64(), Some(0.5));
    assert_eq!(v["family"], "tikhonov");
    assert!(v["diagnostics"]["grid_settings"]["alpha_max_auto"].as_bool().unwrap());
}

#[test]
fn report_round_trips_exactly_and_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = regression_csv(40, 8);
    let xp = write(dir.path(), "X.csv", &x);
    let yp = write(dir.path(), "y.csv", &y);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = run(&["-q", "estimate", "--x", &xp, "--y", &yp, "--family", "cutoff", "--out", path.to_str().unwrap()]);
        assert!(out.status.success());
    }
    let text_a = std::fs::read(&a).unwrap();
    assert_eq!(text_a, std::fs::read(&b).unwrap());

    let parsed: EstimateOutput = serde_json::from_slice(&text_a).unwrap();
    let again = noise_floor::report::to_json_string(&parsed).unwrap();
    assert_eq!(again.as_bytes(), &text_a[..]);
}

#[test]
fn usage_errors_exit_with_2() {
    let out = run(&["estimate", "--x", "X.csv", "--y", "y.csv", "--family", "banana"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["simulate", "--scenario", "pure_noise", "--family", "banana"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["estimate", "--x", "/no/such/X.csv", "--y", "/no/such/y.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let xp = write(dir.path(), "X.csv", "1,2\n3\n");
    let yp = write(dir.path(), "y.csv", "1\n2\n");
    let out = run(&["estimate", "--x", &xp, "--y", &yp]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2"));

    let xp = write(dir.path(), "X2.csv", "1,2\n3,oops\n");
    let out = run(&["estimate", "--x", &xp, "--y", &yp]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2, column 2"));

    let out = bin().args(["simulate", "--scenario", "pure_noise", "--replicates", "2"]).env("NOISE_FLOOR_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_csv_has_one_row_per_replicate() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("records.csv");
    let json = dir.path().join("result.json");
    let out = run(&[
        "-q", "simulate", "--scenario", "pure_noise", "--n", "60", "--p", "10", "--replicates", "25", "--seed", "3",
        "--csv", csv.to_str().unwrap(), "--out", json.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 26);
    assert!(text.starts_with("n,replicate,sigma2_hat,alpha_hat,delta,sup_exceedance"));
    let v: Value = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    assert_eq!(v["levels"][0]["records"].as_array().unwrap().len(), 25);
    assert_eq!(v["config"]["seed"], 3);
}

#[test]
fn spline_and_envelope_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let n = 80;
    let mut data = String::from("x,y\n");
    for i in 0..n {
        let x = (i as f64 + 0.5) / n as f64;
        let wobble = (((i * 37 + 5) % 19) as f64 - 9.0) / 30.0;
        data += &format!("{x},{}\n", (2.0 * std::f64::consts::PI * x).sin() + wobble);
    }
    let dp = write(dir.path(), "data.csv", &data);
    let out = run(&["-q", "spline", "--data", &dp, "--m", "2", "--fitted"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["fitted"].as_array().unwrap().len(), n);
    assert!(v["sigma2_hat"].as_f64().unwrap() > 0.0);

    let out = run(&["envelope", "dump", "--spline-n", "64", "--format", "csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("alpha,d,w,v,v_tilde"));
    assert!(text.lines().count() > 10);
}

#[test]
fn help_lists_every_flag_default() {
    let out = run(&["estimate", "--help"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for flag in ["--family", "--epsilon", "--alpha-min", "--alpha-max", "--grid-ratio", "--out", "--format"] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
    assert!(text.contains("[default: 0.5]"));
    assert!(text.contains("[default: tikhonov]"));
}
