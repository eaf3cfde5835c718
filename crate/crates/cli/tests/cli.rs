use std::path::Path;
use std::process::{Command, Output};

use qrg::coherent::{ideal_winning, parse_curve_csv};
use qrg::montecarlo::parse_estimate_csv;

fn qrg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrg")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn gen_then_check_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.txt").to_string_lossy().into_owned();
    let gen = qrg(&["matchings", "gen", "--family", "sextet", "--k", "3", "--output", &path]);
    assert!(gen.status.success());
    let check = qrg(&["matchings", "check", "--file", &path]);
    assert_eq!(check.status.code(), Some(0));
    assert_eq!(stdout(&check).trim(), "independent");
}

#[test]
fn dependent_family_exits_one_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "dep.txt", "4 3\n1-2 3-4\n1-3 2-4\n1-4 2-3\n");
    let out = qrg(&["matchings", "check", "--family", &path]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.starts_with("dependent\n"));
    assert!(text.contains("witness="));
}

#[test]
fn malformed_family_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "bad.txt", "junk\n");
    assert_eq!(qrg(&["matchings", "check", "--family", &path]).status.code(), Some(2));
    assert_eq!(qrg(&["value", "sv", "--family", "/nonexistent/f.txt"]).status.code(), Some(2));
    assert_eq!(qrg(&["simulate", "--eta", "1.5"]).status.code(), Some(2));
}

#[test]
fn starved_solver_exits_three() {
    let out = qrg(&["value", "pv", "--k", "2", "--max-iter", "3"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn selective_value_output() {
    let out = qrg(&["value", "sv", "--k", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("value=0.500000000000"));
    assert!(text.contains("answers_examined=512"));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.conf", "# defaults\nk = 3\ntrials=2000\nseed=4\n");
    let from_file = stdout(&qrg(&["--config", &cfg, "value", "sv"]));
    assert!(from_file.contains("value=0.500000000000"));
    let overridden = stdout(&qrg(&["--config", &cfg, "value", "sv", "--k", "2"]));
    assert!(overridden.contains("value=0.750000000000"));

    let sim = qrg(&["--config", &cfg, "simulate"]);
    let rows = parse_estimate_csv(&stdout(&sim)).unwrap();
    assert_eq!((rows[0].trials, rows[0].seed, rows[0].k), (2000, 4, 3));

    let bad = write(dir.path(), "bad.conf", "colour=blue\n");
    assert_eq!(qrg(&["--config", &bad, "value", "sv"]).status.code(), Some(2));
}

#[test]
fn curves_csv_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv").to_string_lossy().into_owned();
    let svg = dir.path().join("c.svg").to_string_lossy().into_owned();
    let out = qrg(&["curves", "--k", "2", "--alpha-max", "2", "--steps", "5", "--output", &csv, "--plot", &svg]);
    assert!(out.status.success());
    let rows = parse_curve_csv(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[4].alpha, 2.0);
    for r in &rows {
        assert!((r.winning_paper - ideal_winning(r.alpha)).abs() < 1e-8);
        let e = r.cheating.unwrap();
        assert!((r.threshold.unwrap() - 0.5 * (1.0 + e)).abs() < 1e-8);
    }
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn preset_writes_one_file_per_series() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("fig7.csv").to_string_lossy().into_owned();
    let out = qrg(&["curves", "--preset", "fig7", "--steps", "4", "--no-cheating", "--output", &stem]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for eta in ["1", "0.8", "0.6", "0.4", "0.2"] {
        let p = dir.path().join(format!("fig7_eta{eta}_nu1.csv"));
        assert!(p.exists(), "missing {}", p.display());
    }
    // several series cannot share stdout
    assert_eq!(qrg(&["curves", "--preset", "fig7", "--steps", "4"]).status.code(), Some(2));
}

#[test]
fn simulate_reports_adjudication() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv").to_string_lossy().into_owned();
    let out = qrg(&["simulate", "--nu", "0.9", "--trials", "50000", "--seed", "1", "--output", &csv]);
    assert!(out.status.success());
    let summary = stdout(&out);
    assert!(summary.contains("verdict="), "{summary}");
    let rows = parse_estimate_csv(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(rows[0].trials, 50_000);
    assert_eq!(rows[0].nu, 0.9);
}
