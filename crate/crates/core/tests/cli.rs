use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use swing_core::model::io::write_lattice;
use swing_core::model::{binomial, BinomialSpec, DriftKind};
use swing_core::policy::{BOUNDARY_COLUMNS, ROLLOUT_COLUMNS};
use swing_core::stopping::MARGINAL_COLUMNS;
use swing_core::dual::GAP_COLUMNS;
use swing_core::table::Table;
use swing_core::value::VALUE_COLUMNS;
use tempfile::TempDir;

fn swing(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swing")).args(args).output().expect("binary runs")
}

fn config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn parses(path: &Path, columns: &[&str]) -> Table {
    Table::parse(&fs::read_to_string(path).unwrap(), columns).unwrap()
}

#[test]
fn price_constant_model() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "model = constant\nsteps = 12\nstarts = 0:0, 1.5:0.25\n");
    let out = dir.path().join("out");
    let o = swing(&["price", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("J(0,0)=1.0000000000000000e0"));
    assert!(stdout(&o).contains("J(1.5,0.25)=7.5000000000000000e-1"));
    let values = parses(&out.join("value_field.txt"), &VALUE_COLUMNS);
    assert!(!values.rows.is_empty());
    let roll = parses(&out.join("rollout_0.txt"), &ROLLOUT_COLUMNS);
    let reward: f64 = roll.column_f64("reward_increment").unwrap().iter().sum();
    assert!((reward - 1.0).abs() < 1e-12);
    parses(&out.join("boundary_1.txt"), &BOUNDARY_COLUMNS);
}

#[test]
fn price_binary_example_with_steps_flag() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "model = binary\nstarts = 0:0.5\n");
    let o = swing(&["price", "--config", &cfg, "--steps", "96", "--exhaustive", "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = stdout(&o).lines().find(|l| l.starts_with("J(0,0.5)=")).unwrap().to_string();
    let v: f64 = line.trim_start_matches("J(0,0.5)=").parse().unwrap();
    assert!((v - 0.875).abs() < 0.05);
}

#[test]
fn misaligned_grid_leaves_no_files() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "model = constant\nsteps = 10\n");
    let out = dir.path().join("out");
    let o = swing(&["price", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("1/(L*dt)"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "model = binary\nstpes = 96\n");
    let o = swing(&["price", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("stpes"));
}

#[test]
fn verify_binary_example() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "model = binary\nsteps = 96\nstarts = 0:0.5, 0:0, 0:1\n");
    let out = dir.path().join("out");
    let o = swing(&["verify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let report = fs::read_to_string(out.join("verify.txt")).unwrap();
    let table = Table::parse(&report, &["check", "status", "detail"]).unwrap();
    assert!(table.rows.iter().all(|r| r[1] == "pass"), "{report}");
    assert!(table.rows.iter().any(|r| r[0] == "oracle"));
}

#[test]
fn verify_tiny_lattice_file_against_brute_force() {
    let dir = TempDir::new().unwrap();
    let lattice = binomial(&BinomialSpec::scaled(DriftKind::Submartingale, 1.0, 2.0, 4, 0.2, 0.3)).unwrap();
    fs::write(dir.path().join("tiny.lat"), write_lattice(&lattice, 1.0)).unwrap();
    let cfg = config(dir.path(), "model = file\nlattice_file = tiny.lat\n");
    let out = dir.path().join("out");
    let o = swing(&["verify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = fs::read_to_string(out.join("verify.txt")).unwrap();
    assert!(report.lines().any(|l| l.starts_with("oracle pass")), "{report}");
}

#[test]
fn negative_cashflow_file_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let lattice = binomial(&BinomialSpec::scaled(DriftKind::Martingale, 1.0, 3.0, 6, 0.0, 0.3)).unwrap();
    let text = write_lattice(&lattice, 1.0).replacen("\n0 0 1.0000000000000000e0", "\n0 0 -1.0000000000000000e0", 1);
    fs::write(dir.path().join("bad.lat"), text).unwrap();
    let cfg = config(dir.path(), "model = file\nlattice_file = bad.lat\n");
    let out = dir.path().join("out");
    let o = swing(&["verify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("invalid model"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn dual_study_and_hypothesis() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "model = binary\nk_list = 48, 96, 192\n");
    let out = dir.path().join("out");
    let o = swing(&["dual", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let gaps = parses(&out.join("gap_study.txt"), &GAP_COLUMNS);
    assert_eq!(gaps.column_f64("K").unwrap(), vec![48.0, 96.0, 192.0]);
    assert!(gaps.column_f64("gap").unwrap().iter().all(|&g| g >= -1e-10));
    assert!(out.join("mbar_trace.txt").exists());

    let cfg = config(dir.path(), "model = constant\nhorizon = 1\nsteps = 4\nk_list = 4, 8\n");
    let o = swing(&["dual", "--config", &cfg, "--out", dir.path().join("o2").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("L*T > 1"), "{}", stderr(&o));
}

#[test]
fn constant_model_has_zero_gaps() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "model = constant\nsteps = 24\nk_list = 24, 48, 96\n");
    let out = dir.path().join("out");
    let o = swing(&["dual", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let gaps = parses(&out.join("gap_study.txt"), &GAP_COLUMNS);
    assert!(gaps.column_f64("gap").unwrap().iter().all(|&g| g.abs() < 1e-12));
}

#[test]
fn stopping_report_parses() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "model = binary\nstarts = 0:0.5, 0:1, 2.5:0\n");
    let out = dir.path().join("out");
    let o = swing(&["stopping", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let t = parses(&out.join("marginal_value.txt"), &MARGINAL_COLUMNS);
    assert_eq!(t.rows[0][10], "i");
    assert!(t.rows.iter().all(|r| r[11] == "1"));
    let sup = t.column_f64("sup_A").unwrap();
    assert_eq!(sup[0], 1.5);
}

#[test]
fn outputs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "model = submartingale\nmu = 0.2\nsteps = 48\npaths = 200\nstarts = 0:0\n");
    let runs: Vec<String> = (0..2)
        .map(|i| {
            let out = dir.path().join(format!("run{i}"));
            let o = swing(&["price", "--config", &cfg, "--seed", "11", "--out", out.to_str().unwrap()]);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
            fs::read_to_string(out.join("rollout_0.txt")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    let other = dir.path().join("other");
    swing(&["price", "--config", &cfg, "--seed", "12", "--out", other.to_str().unwrap()]);
    assert_ne!(runs[0], fs::read_to_string(other.join("rollout_0.txt")).unwrap());

    let bundles: Vec<String> = (0..2)
        .map(|i| {
            let out = dir.path().join(format!("ex{i}"));
            let o = swing(&["example", "--out", out.to_str().unwrap()]);
            assert_eq!(o.status.code(), Some(0));
            fs::read_to_string(out.join("summary.txt")).unwrap()
                + &fs::read_to_string(out.join("marginal_value.txt")).unwrap()
        })
        .collect();
    assert_eq!(bundles[0], bundles[1]);
    assert!(bundles[0].contains("J(0,0.5)=8.7500000000000000e-1"));
}
