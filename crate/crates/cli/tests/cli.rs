use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hybrid_gbs::gaussian::{marginal_photon, thermal_covariance};
use hybrid_gbs::model::build_toy_hamiltonian;
use hybrid_gbs::{CovarianceMatrix, ModeLayout, ProbabilityTable, ToyParams};
use hybrid_gbs_cli::{CheckStatus, ValidationReport};
use serde_json::json;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hybrid-gbs"));
    c.env("RUST_LOG", "error");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_json(dir: &TempDir, name: &str, value: serde_json::Value) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, value.to_string()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect()
}

#[test]
fn hafnian_of_k4_is_three() {
    let dir = TempDir::new().unwrap();
    let entries: Vec<[f64; 2]> = (0..16).map(|k| [if k / 4 == k % 4 { 0.0 } else { 1.0 }, 0.0]).collect();
    let m = write_json(&dir, "k4.json", json!({"n": 4, "entries": entries}));
    let out = run(&["hafnian", "--input", s(&m)]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "3 0\n");
}

#[test]
fn hafnian_rejects_asymmetric_matrix() {
    let dir = TempDir::new().unwrap();
    let m = write_json(&dir, "bad.json", json!({"n": 2, "entries": [[0, 0], [1, 0], [2, 0], [0, 0]]}));
    let out = run(&["hafnian", "--input", s(&m)]);
    assert!(!out.status.success());
}

#[test]
fn default_validation_passes() {
    let out = run(&["validate"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: ValidationReport = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(report.passed);
    assert!(report.checks.iter().all(|c| c.status != CheckStatus::Fail));
}

#[test]
fn validation_reports_triple_route_at_cutoff_12() {
    let dir = TempDir::new().unwrap();
    let cfg = write_json(&dir, "cfg.json", json!({"mode": "validate", "T_eff": 0.3, "cutoff": 12}));
    let out = run(&["validate", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(0));
    let report: ValidationReport = serde_json::from_str(&stdout(&out)).unwrap();
    let c = report.check("triple_route").unwrap();
    assert_eq!(c.status, CheckStatus::Pass);
    assert!(c.residual.unwrap() <= 1e-7);
}

#[test]
fn corrupted_covariance_fails_validation() {
    let dir = TempDir::new().unwrap();
    let g = thermal_covariance(&build_toy_hamiltonian(&ToyParams::default()).unwrap(), 0.3).unwrap();
    let mut a = g.a().clone();
    let eta = g.n()[(0, 0)].re;
    a[(0, 0)] = hybrid_gbs::C64::new(2.0 * (eta * (eta + 1.0)).sqrt() + 0.1, 0.0);
    let bad = CovarianceMatrix::new(g.layout(), g.n().clone(), a).unwrap();
    let path = dir.path().join("bad.json");
    bad.write_path(&path).unwrap();
    let cfg = write_json(&dir, "cfg.json", json!({"T_eff": 0.3}));
    let out = run(&["validate", "--config", s(&cfg), "--input", s(&path)]);
    assert_eq!(out.status.code(), Some(1));
    let report: ValidationReport = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(!report.passed);
    let c = report.check("covariance_physical").unwrap();
    assert_eq!(c.status, CheckStatus::Fail);
    assert!(c.detail.as_ref().unwrap().contains("alpha_max"));
}

#[test]
fn probs_on_vacuum_is_one_line() {
    let dir = TempDir::new().unwrap();
    let vac = dir.path().join("vac.json");
    CovarianceMatrix::vacuum(ModeLayout::new(2, 1).unwrap()).write_path(&vac).unwrap();
    let table_path = dir.path().join("table.json");
    let out = run(&["probs", "--input", s(&vac), "--output", s(&table_path)]);
    assert!(out.status.success());
    let table = ProbabilityTable::from_path(&table_path).unwrap();
    assert_eq!(table.len(), 1);
    let (p, v) = &table.entries()[0];
    assert_eq!(p.counts(), &[0, 0]);
    assert_eq!(*v, 1.0);
}

#[test]
fn probs_table_reingests_with_identical_residuals() {
    let dir = TempDir::new().unwrap();
    let table = dir.path().join("table.json");
    let cfg = write_json(&dir, "cfg.json", json!({"T_eff": 0.5, "toy": {"hbar_omega": 2, "epsilon": 1, "gamma": 1.0, "n0": 1, "q0": 7}}));
    assert!(run(&["probs", "--config", s(&cfg), "--output", s(&table)]).status.success());

    let plain = run(&["validate", "--config", s(&cfg)]);
    let with_table = write_json(
        &dir,
        "cfg2.json",
        json!({"T_eff": 0.5, "toy": {"hbar_omega": 2, "epsilon": 1, "gamma": 1.0, "n0": 1, "q0": 7}, "table_path": table}),
    );
    let reread = run(&["validate", "--config", s(&with_table)]);
    assert!(plain.status.success() && reread.status.success());
    let a: ValidationReport = serde_json::from_str(&stdout(&plain)).unwrap();
    let b: ValidationReport = serde_json::from_str(&stdout(&reread)).unwrap();
    assert_eq!(a, b);
    assert_eq!(b.check("table_round_trip").unwrap().residual, Some(0.0));
}

#[test]
fn sampling_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write_json(&dir, "cfg.json", json!({"mode": "sample", "T_eff": 1.0, "count": 2000, "seed": 42}));
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(run(&["sample", "--config", s(&cfg), "--output", s(&a)]).status.success());
    assert!(run(&["sample", "--config", s(&cfg), "--output", s(&b)]).status.success());
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 2000);
    assert!(text.lines().all(|l| l.parse::<usize>().is_ok()));
    let other = stdout(&run(&["sample", "--config", s(&cfg), "--seed", "7"]));
    assert_ne!(other, text);
}

#[test]
fn sampling_from_a_table_file() {
    let dir = TempDir::new().unwrap();
    let g = dir.path().join("g.json");
    CovarianceMatrix::thermal(&[0.4, 0.1]).unwrap().write_path(&g).unwrap();
    let table = dir.path().join("t.json");
    assert!(run(&["probs", "--input", s(&g), "--output", s(&table)]).status.success());
    let cfg = write_json(&dir, "cfg.json", json!({"table_path": table, "count": 100, "seed": 3}));
    let from_table = stdout(&run(&["sample", "--config", s(&cfg)]));
    let direct = stdout(&run(&["sample", "--input", s(&g), "--seed", "3", "--config", s(&write_json(&dir, "c2.json", json!({"count": 100})))]));
    assert_eq!(from_table, direct);
    assert_eq!(from_table.lines().count(), 100);
    assert!(from_table.lines().all(|l| l.split(',').count() == 2));
}

#[test]
fn gamma_sweep_from_zero_starts_thermal() {
    let dir = TempDir::new().unwrap();
    let t = 0.7;
    let cfg = write_json(&dir, "cfg.json", json!({"T_eff": t, "sweep": {"variable": "gamma", "from": 0.0, "to": 1.0, "points": 5}}));
    let out = run(&["toy-sweep", "--config", s(&cfg)]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().next(), Some("sweep_value,eta,alpha_abs,alpha_c,alpha_max,r_eff,q_eff"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 5);
    let bose = 1.0 / ((2.0f64 / t).exp() - 1.0);
    assert_eq!(rows[0][0], 0.0);
    assert!((rows[0][1] - bose).abs() < 1e-12);
    assert!(rows[0][2].abs() < 1e-14);
}

#[test]
fn temperature_sweep_is_monotone_and_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write_json(
        &dir,
        "cfg.json",
        json!({"toy": {"hbar_omega": 2, "epsilon": 1, "gamma": 1.0, "n0": 1, "q0": 7}, "sweep": {"variable": "T", "from": 0.01, "to": 2.0, "points": 30}}),
    );
    let a = stdout(&run(&["toy-sweep", "--config", s(&cfg)]));
    assert_eq!(a, stdout(&run(&["toy-sweep", "--config", s(&cfg)])));
    let rows = csv_rows(&a);
    assert!(rows.windows(2).all(|w| w[1][1] >= w[0][1]));
}

#[test]
fn published_parameters_show_squeezing_window() {
    let dir = TempDir::new().unwrap();
    let cfg = write_json(
        &dir,
        "cfg.json",
        json!({"T_eff": 0.0, "sweep": {"variable": "gamma", "from": 0.01, "to": 100, "points": 80, "log_scale": true}}),
    );
    let rows = csv_rows(&stdout(&run(&["toy-sweep", "--config", s(&cfg)])));
    assert!(rows.iter().all(|r| r[2] < r[4]));
    assert!(rows.iter().any(|r| r[3] < r[2] && r[2] < r[4]));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let cases = [
        json!({"sweep": {"variable": "gamma", "from": 0.1, "to": 1, "points": 1}}),
        json!({"sweep": {"variable": "gamma", "from": 1, "to": 0.1, "points": 4}}),
        json!({"mode": "probs"}),
        json!({"unknown_field": true}),
        json!({"toy": {"hbar_omega": -2, "epsilon": 1, "gamma": 1, "n0": 1, "q0": 7}}),
    ];
    for (k, c) in cases.into_iter().enumerate() {
        let cfg = write_json(&dir, &format!("c{k}.json"), c);
        assert_eq!(run(&["toy-sweep", "--config", s(&cfg)]).status.code(), Some(2), "case {k}");
    }
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["toy-sweep", "--config", s(&missing)]).status.code(), Some(2));
    assert_eq!(run(&["hafnian"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn photon_marginal_matches_sweep_row() {
    let dir = TempDir::new().unwrap();
    let cfg = write_json(&dir, "cfg.json", json!({"T_eff": 0.2, "sweep": {"variable": "gamma", "from": 0.5, "to": 1.5, "points": 2}}));
    let rows = csv_rows(&stdout(&run(&["toy-sweep", "--config", s(&cfg)])));
    let toy = ToyParams { gamma: 1.5, ..ToyParams::default() };
    let g = marginal_photon(&thermal_covariance(&build_toy_hamiltonian(&toy).unwrap(), 0.2).unwrap());
    assert_eq!(rows[1][1], g.n()[(0, 0)].re);
    assert_eq!(rows[1][2], g.a()[(0, 0)].norm());
}
