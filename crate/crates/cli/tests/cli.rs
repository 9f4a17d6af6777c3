use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn normground(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_normground"))
        .args(args)
        .env("NORMGROUND_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

const SMALL: [&str; 8] = ["--n", "16", "--L", "8", "--tol", "1e-8", "--dt-imag", "0.5"];

#[test]
fn no_arguments_is_a_usage_error() {
    let o = normground(&[]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn exponent_outside_range_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = normground(&["--out", out, "groundstate", "--p", "3.5", "--rho", "1"]);
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.contains("'p'"), "{e}");
}

#[test]
fn manifest_records_regime_and_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["--out", out, "groundstate", "--p", "3.2", "--rho", "2", "--seed-width", "1"];
    args.extend(SMALL);
    let o = normground(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(dir.path());
    assert_eq!(m["regime"], "large-mass");
    assert_eq!(m["parameters"]["rho"], "2");
    assert_eq!(m["parameters"]["n"], "16");
    for f in ["result.json", "u.ngf", "curve.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }

    let o = normground(&["--out", out, "split-test", "--n", "16", "--L", "12", "--radius", "1", "--separations", "2,2.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(manifest(dir.path())["regime"], "small-mass");
}

#[test]
fn scan_output_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let mut args = vec!["--out", dir.path().to_str().unwrap(), "scan-rho", "--p", "3.2", "--rhos", "1,2,3"];
        args.extend(SMALL);
        let o = normground(&args);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let ca = fs::read(a.path().join("curve.csv")).unwrap();
    let cb = fs::read(b.path().join("curve.csv")).unwrap();
    assert_eq!(ca, cb);
    assert!(String::from_utf8(ca).unwrap().starts_with("rho,I,omega,converged\n"));
}

#[test]
fn unconverged_points_are_flagged_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = normground(&[
        "--out", out, "scan-rho", "--p", "3.2", "--rhos", "1,2", "--n", "16", "--L", "8", "--max-iters", "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.ends_with(",false")), "{csv}");
}

#[test]
fn flags_override_config_and_unknown_keys_fail() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small run\np = 3.2\nrho = 1.5\nn = 16\nL = 8\ntol = 1e-8\n").unwrap();
    let out = dir.path().join("out");
    let o = normground(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "groundstate",
        "--rho",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&out);
    assert_eq!(m["parameters"]["rho"], "2");
    assert_eq!(m["parameters"]["n"], "16");
    assert_eq!(m["parameters"]["p"], "3.2");

    fs::write(&cfg, "rho = 1\n\nbogus = 3\n").unwrap();
    let o = normground(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "groundstate"]);
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.contains(":3:") && e.contains("bogus"), "{e}");

    fs::write(&cfg, "rho = abc\n").unwrap();
    let o = normground(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "groundstate"]);
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.contains(":1:") && e.contains("rho"), "{e}");
}

#[test]
fn biharmonic_negativity_scan() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = normground(&["--out", out, "biharm-neg", "--N", "5", "--F", "-1*|s|^3", "--Rn", "10:60:10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("negscan.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("Rn,J"));
    let js: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(js.len(), 6);
    assert!(js[0] > 0.0 && *js.last().unwrap() < 0.0);
}

#[test]
fn evolve_round_trip_from_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let gs = dir.path().join("gs");
    let mut args = vec!["--out", gs.to_str().unwrap(), "groundstate", "--p", "3.2", "--rho", "2", "--seed-width", "1"];
    args.extend(SMALL);
    assert!(normground(&args).status.success());
    let ev = dir.path().join("ev");
    let input = gs.join("u.ngf");
    let o = normground(&[
        "--out",
        ev.to_str().unwrap(),
        "evolve",
        "--p",
        "3.2",
        "--in",
        input.to_str().unwrap(),
        "--dt",
        "1e-3",
        "--t-end",
        "0.05",
        "--stride",
        "10",
        "--strict",
        "true",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(ev.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,charge,energy,orbit_distance\n"));
    assert_eq!(csv.lines().count(), 7);
    assert!(ev.join("final.ngf").exists());
}

#[test]
fn selftest_passes() {
    let o = normground(&["selftest"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}
