use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_annulus-flux"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn config(boundary: &str, extra: &str) -> String {
    format!(
        r#"{{
  "grid": {{"n_r": 24, "n_theta": 16}},
  "nu": 1.0,
  "boundary": {boundary}{extra}
}}"#
    )
}

const COUETTE: &str = r#"{"preset": "couette", "omega1": 1.0, "omega2": -0.5}"#;
const WAVY: &str = r#"{"preset": "fourier",
    "outer": {"normal": {"cos": [0.1]}, "tangential": {"mean": 1.0, "sin": [0.1]}},
    "inner": {"normal": {"sin": [0.2]}, "tangential": {"mean": -0.5}}}"#;

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_couette_writes_report_and_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &config(COUETTE, ""));
    let out = dir.path().join("run");
    let o = run(&["--quiet", "solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&out.join("report.json"));
    let r = &report["report"];
    assert_eq!(r["converged"], true);
    assert!(r["diagnostics"]["bernoulli_deviation"].as_f64().unwrap() < 1e-8);
    assert!(r["diagnostics"]["max_principle_ok"].as_bool().unwrap());
    assert!(r["F"].as_f64().unwrap().abs() < 1e-15);
    assert!(!r["residual_history"].as_array().unwrap().is_empty());
    let csv = fs::read_to_string(out.join("fields.csv")).unwrap();
    assert!(csv.starts_with("r,theta,u_r,u_theta,p\n"));
    assert_eq!(csv.lines().count(), 1 + 24 * 16);
    assert!(json(&out.join("meta.json"))["elapsed_seconds"].is_number());
}

#[test]
fn report_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let body = config(
        r#"{"preset": "spiral", "flux": 6.283185307179586, "amplitude": 1.0}"#,
        r#", "oracle": {"kind": "spiral", "flux": 6.283185307179586, "amplitude": 1.0}"#,
    );
    let cfg = write_config(dir.path(), "s.json", &body);
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = run(&["--quiet", "solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        reports.push(fs::read(out.join("report.json")).unwrap());
        assert!(out.join("oracle_fields.csv").exists());
    }
    assert_eq!(reports[0], reports[1]);
    let v: Value = serde_json::from_slice(&reports[0]).unwrap();
    assert!(v["oracle"]["velocity_l2_error"].as_f64().unwrap() < 1e-8);
}

#[test]
fn config_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("malformed.json", "{ \"grid\": "),
        ("negative_nu.json", &*config(COUETTE, "").replace("\"nu\": 1.0", "\"nu\": -1.0")),
        ("unknown.json", &*config(COUETTE, ", \"colour\": 1")),
        ("inadmissible.json", &*config(r#"{"preset": "fourier", "outer": {}, "inner": {"normal": {"mean": 1.0}}}"#, "")),
    ];
    for (name, body) in cases {
        let cfg = write_config(dir.path(), name, body);
        let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code(&o), 3, "{name}");
        assert!(!o.stderr.is_empty());
    }
    let o = run(&["solve", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let msg = {
        let cfg = write_config(dir.path(), "n.json", &config(COUETTE, "").replace("\"nu\": 1.0", "\"nu\": 0"));
        String::from_utf8(run(&["solve", "--config", cfg.to_str().unwrap()]).stderr).unwrap()
    };
    assert!(msg.contains("line 3"), "{msg}");
    assert_eq!(code(&run(&["frobnicate"])), 3);
    let cfg = write_config(dir.path(), "nosweep.json", &config(COUETTE, ""));
    assert_eq!(code(&run(&["sweep", "--config", cfg.to_str().unwrap()])), 3);
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let o = bin().env("ANNULUS_FLUX_THREADS", "zero").args(["verify", "--n-r", "8", "--n-theta", "8"]).output().unwrap();
    assert_eq!(code(&o), 3);
    let o = bin().env("ANNULUS_FLUX_THREADS", "1").args(["--quiet", "verify", "--n-r", "8", "--n-theta", "8"]).output().unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn nonconvergence_exits_2_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let body = config(WAVY, r#", "solver": {"method": "picard", "max_iter": 1}"#);
    let cfg = write_config(dir.path(), "p.json", &body);
    let out = dir.path().join("run");
    let o = run(&["--quiet", "solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let r = json(&out.join("report.json"));
    assert_eq!(r["report"]["converged"], false);
    assert_eq!(r["report"]["residual_history"].as_array().unwrap().len(), 2);
}

#[test]
fn strong_inflow_at_low_viscosity_reports_history() {
    let dir = tempfile::tempdir().unwrap();
    let body = config(r#"{"preset": "pure_flux", "flux": -10.0}"#, r#", "solver": {"max_iter": 30}"#)
        .replace("\"nu\": 1.0", "\"nu\": 0.05");
    let cfg = write_config(dir.path(), "in.json", &body);
    let out = dir.path().join("run");
    let o = run(&["--quiet", "solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(matches!(code(&o), 0 | 2));
    assert!(!json(&out.join("report.json"))["report"]["residual_history"].as_array().unwrap().is_empty());
}

#[test]
fn sweeps_write_traces() {
    let dir = tempfile::tempdir().unwrap();
    let flux = config(WAVY, r#", "sweep": {"parameter": "flux", "values": [0, 1, 2, 5]}"#);
    let cfg = write_config(dir.path(), "f.json", &flux);
    let out = dir.path().join("flux");
    let o = run(&["--quiet", "sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines[0], "parameter,value,J,converged,iterations");
    assert_eq!(lines.len(), 5);
    assert!(lines[1..].iter().all(|l| l.starts_with("flux,") && l.contains(",true,")));

    let lam = config(WAVY, r#", "sweep": {"parameter": "lambda", "values": [0, 0.5, 1]}"#);
    let cfg = write_config(dir.path(), "l.json", &lam);
    let out = dir.path().join("lambda");
    assert_eq!(code(&run(&["--quiet", "sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])), 0);
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    let first: Vec<&str> = trace.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(first[0], "lambda");
    assert_eq!(first[1].parse::<f64>().unwrap(), 0.0);
    assert_eq!(first[2].parse::<f64>().unwrap(), 0.0);
    let sweep = json(&out.join("sweep.json"));
    assert!(sweep["trace"]["first_failure"].is_null());
}

#[test]
fn descending_flux_sweep_records_failures_if_any() {
    let dir = tempfile::tempdir().unwrap();
    let body = config(WAVY, r#", "nu": 0.1, "sweep": {"parameter": "flux", "values": [0, -5, -20, -60]}, "solver": {"method": "picard", "max_iter": 50}"#)
        .replacen("\"nu\": 1.0,\n", "", 1);
    let cfg = write_config(dir.path(), "neg.json", &body);
    let out = dir.path().join("neg");
    let o = run(&["--quiet", "sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let sweep = json(&out.join("sweep.json"));
    let failure = &sweep["trace"]["first_failure"];
    match code(&o) {
        0 => assert!(failure.is_null()),
        2 => assert!(failure.is_u64()),
        c => panic!("exit {c}"),
    }
}

#[test]
fn verify_is_deterministic_and_fails_on_tiny_grids() {
    let a = run(&["--quiet", "verify", "--n-r", "16", "--n-theta", "8"]);
    let b = run(&["--quiet", "verify", "--n-r", "16", "--n-theta", "8"]);
    assert_eq!(a.stdout, b.stdout);
    let tiny = run(&["--quiet", "verify", "--n-r", "8", "--n-theta", "8"]);
    assert_eq!(code(&tiny), 1);
    let table = String::from_utf8(tiny.stdout).unwrap();
    assert!(table.lines().any(|l| l.starts_with("head_integral_identity") && l.ends_with("FAIL")), "{table}");
}

#[test]
fn diagnose_amick_dump() {
    let dir = tempfile::tempdir().unwrap();
    let body = config(
        COUETTE,
        r#", "oracle": {"kind": "amick", "lambda0": 1.0, "profile": {"shape": "sin_squared", "amplitude": 1.0}}"#,
    )
    .replace("\"n_r\": 24", "\"n_r\": 32");
    let cfg = write_config(dir.path(), "a.json", &body);
    let out = dir.path().join("run");
    assert_eq!(code(&run(&["--quiet", "solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])), 0);
    let dump = out.join("oracle_fields.csv");
    let diag = dir.path().join("diag");
    let o = run(&[
        "--quiet", "diagnose", "--fields", dump.to_str().unwrap(), "--lambda", "1", "--nu", "1", "--flux", "1",
        "--out", diag.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let d = json(&diag.join("diagnostics.json"));
    let f = |k: &str| d[k].as_f64().unwrap();
    assert!(f("p1") > f("p2"));
    assert!(f("phi_interior_sup").is_finite());
    assert!(d["max_principle_ok"].is_boolean());
    assert!(f("identity37_lhs") != 0.0);
    assert!((f("identity37_lhs") - f("identity37_rhs")).abs() < 1e-8);
    assert!((f("identity32_lhs") - f("identity32_rhs")).abs() < 1e-8);
    assert!(f("euler_residual") < 1e-8);
}

#[test]
fn diagnose_zero_and_corrupt_fields() {
    let dir = tempfile::tempdir().unwrap();
    let g = annulus_core::PolarGrid::new(8, 4, 1.0, 2.0).unwrap();
    let zero = dir.path().join("zero.csv");
    annulus_core::VelocityField::zeros(&g)
        .write_csv(Some(&annulus_core::ScalarField::zeros(&g)), fs::File::create(&zero).unwrap())
        .unwrap();
    let out = dir.path().join("z");
    let args = ["--quiet", "diagnose", "--fields", zero.to_str().unwrap(), "--lambda", "1", "--nu", "1", "--out", out.to_str().unwrap()];
    assert_eq!(code(&run(&args)), 0);
    let d = json(&out.join("diagnostics.json"));
    for (k, v) in d.as_object().unwrap() {
        if let Some(x) = v.as_f64() {
            assert_eq!(x, 0.0, "{k}");
        }
    }
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "r,theta,u_r\n1,2,3\n").unwrap();
    let o = run(&["diagnose", "--fields", bad.to_str().unwrap(), "--lambda", "1", "--nu", "1"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        annulus_cli::RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 4);
}
