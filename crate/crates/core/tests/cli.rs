use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn zgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zgen")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn wick_verify_exit_codes() {
    let ok = zgen(&["wick-verify", "--m-max", "12"]);
    assert_eq!(ok.status.code(), Some(0));
    let report = json(&ok);
    assert_eq!(report["schema"], 1);
    assert_eq!(report["result"]["cases"].as_array().unwrap().len(), 49);

    let small = zgen(&["wick-verify", "--m-max", "1"]);
    assert_eq!(small.status.code(), Some(0));

    let zero = zgen(&["wick-verify", "--m-max", "0"]);
    assert_eq!(zero.status.code(), Some(2));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.txt", "geometry = chain\nN = 2\np_max = 1\n");
    for cmd in ["z-series", "compare", "propagator"] {
        let a = zgen(&[cmd, "--config", &config]);
        let b = zgen(&[cmd, "--config", &config]);
        assert_eq!(a.status.code(), Some(0), "{cmd}");
        assert_eq!(a.stdout, b.stdout, "{cmd}");
    }
}

#[test]
fn output_and_format_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("green.csv");
    let run = zgen(&["green", "--points", "0,0", "--p-max", "1", "--format", "csv", "--output", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0));
    assert!(run.stdout.is_empty());
    let text = std::fs::read_to_string(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("order,re,im"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn free_two_point_in_zero_dimensions() {
    let run = zgen(&["green", "--points", "0,0", "--p-max", "0", "--mass", "1", "--epsilon", "0.1"]);
    assert_eq!(run.status.code(), Some(0));
    let value = &json(&run)["result"]["green"]["per_order"][0];
    // i Delta = -i / (m^2 - i eps)
    let (re, im) = (0.1 / 1.01, -1.0 / 1.01);
    assert!((value[0].as_f64().unwrap() - re).abs() < 1e-15);
    assert!((value[1].as_f64().unwrap() - im).abs() < 1e-15);
}

#[test]
fn odd_green_function_is_zero_with_note() {
    let run = zgen(&["green", "--points", "0,0,0"]);
    assert_eq!(run.status.code(), Some(0));
    let report = json(&run);
    for v in report["result"]["green"]["per_order"].as_array().unwrap() {
        assert_eq!(v[0].as_f64(), Some(0.0));
        assert_eq!(v[1].as_f64(), Some(0.0));
    }
    assert!(report["notes"][0].as_str().unwrap().contains("parity"));
}

#[test]
fn usage_errors() {
    assert_eq!(zgen(&["green", "--points", "0,0", "--p-max", "9"]).status.code(), Some(2));
    assert_eq!(zgen(&["green", "--points", "0,5"]).status.code(), Some(2));
    assert_eq!(zgen(&["green"]).status.code(), Some(2));
    assert_eq!(zgen(&["no-such-command"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.txt", "shape = round\n");
    assert_eq!(zgen(&["z-series", "--config", &bad]).status.code(), Some(2));
    let negative = write_config(dir.path(), "neg.txt", "m = -1\n");
    assert_eq!(zgen(&["propagator", "--config", &negative]).status.code(), Some(2));
    assert_eq!(zgen(&["z-series", "--config", "/no/such/file"]).status.code(), Some(2));
}

#[test]
fn compare_passes_by_default_and_fails_at_zero_tolerance() {
    assert_eq!(zgen(&["compare"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let zero = write_config(dir.path(), "zero.txt", "tolerance = 0\n");
    let run = zgen(&["compare", "--config", &zero]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("deviates"));
    let three = write_config(dir.path(), "three.txt", "geometry = chain\nN = 3\np_max = 1\n");
    let run = zgen(&["compare", "--config", &three]);
    assert_eq!(run.status.code(), Some(0));
    assert_eq!(json(&run)["result"]["per_order"]["tolerance"].as_f64(), Some(1e-4));
}

#[test]
fn fock_check_default_and_degenerate_runs() {
    let run = zgen(&["fock-check"]);
    assert_eq!(run.status.code(), Some(0));
    let report = json(&run);
    assert!(report["result"]["wick"]["continuum_residual"].as_f64().unwrap() < 1e-3);

    let coarse = zgen(&["fock-check", "--steps", "1"]);
    assert_eq!(coarse.status.code(), Some(1));
    assert_eq!(json(&coarse)["result"]["wick_convergence"]["converged"], false);

    let dir = tempfile::tempdir().unwrap();
    let strong = write_config(dir.path(), "strong.txt", "amplitude = 1.0\n");
    let run = zgen(&["fock-check", "--config", &strong, "--dim", "2"]);
    let report = json(&run);
    assert_eq!(report["result"]["wick"]["truncation_warning"], true);
    assert!(report["notes"].as_array().unwrap().iter().any(|n| n.as_str().unwrap().contains("truncation")));
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "m.txt", "m = 2\n");
    let run = zgen(&["propagator", "--config", &config, "--mass", "3"]);
    assert_eq!(json(&run)["config"]["mass"].as_f64(), Some(3.0));
}
