use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diskreeb")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn construct(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["construct", "--variant", "calpic", "--n", "16", "--eps", "0.1", "--rho", "0.7", "--seed", "7"];
    args.extend_from_slice(extra);
    args.extend_from_slice(&["--out", dir.to_str().unwrap()]);
    run(&args)
}

#[test]
fn construct_writes_json_and_csv() {
    let dir = TempDir::new().unwrap();
    let out = construct(dir.path(), &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("CAL") && stdout.contains("density") && stdout.contains("|phi - id|"));

    let file = json(&dir.path().join("construction.json"));
    assert!(file["cal"]["value"].as_f64().unwrap() < 0.0);
    assert_eq!(file["params"]["n"], 16);
    let csv = fs::read_to_string(dir.path().join("packing.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,y,r"));
    assert_eq!(lines.count() % 16, 0);
}

#[test]
fn construct_is_byte_identical_across_runs() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert_eq!(code(&construct(a.path(), &[])), 0);
    assert_eq!(code(&construct(b.path(), &[])), 0);
    for name in ["construction.json", "packing.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn different_seeds_give_different_packings() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert_eq!(code(&construct(a.path(), &[])), 0);
    let out = run(&["construct", "--seed", "8", "--out", b.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_ne!(fs::read(a.path().join("packing.csv")).unwrap(), fs::read(b.path().join("packing.csv")).unwrap());
}

#[test]
fn invalid_configurations_exit_with_2() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let infeasible = run(&["construct", "--rho", "0.95", "--seed", "7", "--out", out_dir]);
    assert_eq!(code(&infeasible), 2);
    assert!(String::from_utf8_lossy(&infeasible.stderr).contains("0.95"));

    assert_eq!(code(&run(&["construct", "--out", out_dir])), 2, "seed is required");
    assert_eq!(code(&run(&["construct", "--variant", "nope", "--seed", "1", "--out", out_dir])), 2);
    assert_eq!(code(&run(&["construct", "--n", "1", "--seed", "1", "--out", out_dir])), 2);
    assert_eq!(code(&run(&["systolic", "--input", dir.path().join("missing.json").to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["genfun", "--map", "bogus", "--out", out_dir])), 2);
    assert_eq!(code(&run(&["orbit", "--variant", "identity", "--x0", "1.5", "--out", out_dir])), 2);
    assert_eq!(code(&run(&["construct", "--bogus-flag"])), 2);

    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"variant": "calpic", "unknown_key": 1}"#).unwrap();
    assert_eq!(code(&run(&["construct", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.json");
    let out = dir.path().join("out");
    fs::write(&cfg, format!(r#"{{"variant": "calpic", "n": 12, "seed": 3, "out": {:?}}}"#, out.to_str().unwrap())).unwrap();
    let res = run(&["construct", "--config", cfg.to_str().unwrap(), "--n", "16"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let file = json(&out.join("construction.json"));
    assert_eq!(file["params"]["n"], 16);
    assert_eq!(file["params"]["seed"], 3);
}

#[test]
fn systolic_flags_the_calpic_instance() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&construct(dir.path(), &[])), 0);
    let input = dir.path().join("construction.json");
    let out = run(&["systolic", "--input", input.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let file = json(&dir.path().join("systolic.json"));
    let rho = file["report"]["rho_sys"].as_f64().unwrap();
    assert!(rho > 1.0, "rho_sys = {rho}");
    assert_eq!(file["classification"], "Hutchings-conjecture counterexample instance");
    assert_eq!(file["report"]["t_min_certified_up_to"], 8);
    assert!(fs::read_to_string(dir.path().join("census.csv")).unwrap().starts_with("x,y,k,period,family"));
}

#[test]
fn systolic_identity_is_zoll() {
    let dir = TempDir::new().unwrap();
    let out = run(&["systolic", "--variant", "identity", "--grid", "40", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let file = json(&dir.path().join("systolic.json"));
    assert!((file["report"]["rho_sys"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(file["classification"].is_null());
}

#[test]
fn genfun_rotation_and_identity() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(code(&run(&["genfun", "--map", "rotation", "--beta", "0.3", "--grid", "32", "--out", d])), 0);
    let file = json(&dir.path().join("genfun.json"));
    assert!((file["w_bottom"].as_f64().unwrap() - 0.15).abs() < 1e-8);
    assert!(file["closedness"]["max_curl"].as_f64().unwrap() < 1e-5);
    assert!(file["gradient_residual"].as_f64().unwrap() < 1e-6);
    assert!(fs::read_to_string(dir.path().join("genfun_w.csv")).unwrap().starts_with("r,theta,R,W\n"));

    assert_eq!(code(&run(&["genfun", "--map", "identity", "--grid", "16", "--out", d])), 0);
    let file = json(&dir.path().join("genfun.json"));
    assert!(file["w_bottom"].as_f64().unwrap().abs() < 1e-15);
    assert!(file["negative_fixed_point"].is_null());
    let csv = fs::read_to_string(dir.path().join("genfun_w.csv")).unwrap();
    let worst = csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap().abs()).fold(0.0, f64::max);
    assert!(worst < 1e-15, "identity W must vanish, got {worst}");
}

#[test]
fn orbit_writes_a_trace() {
    let dir = TempDir::new().unwrap();
    let out = run(&["orbit", "--variant", "identity", "--x0", "0.2", "--y0", "-0.1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("orbit.csv")).unwrap();
    let mut rows = csv.lines();
    assert_eq!(rows.next(), Some("t,x,y,s"));
    let last: Vec<f64> = rows.last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    // Identity return map: the point never moves and crossings come every pi.
    assert!((last[1] - 0.2).abs() < 1e-12 && (last[2] + 0.1).abs() < 1e-12);
    assert!((last[0] - 4.0 * std::f64::consts::PI).abs() < 1e-9);
}

#[test]
fn verify_passes_and_writes_rows() {
    let dir = TempDir::new().unwrap();
    let out = run(&["verify", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = json(&dir.path().join("verify.json"));
    let rows = rows.as_array().unwrap();
    assert!(rows.len() > 20);
    assert!(rows.iter().all(|r| r["passed"] == true));
}
