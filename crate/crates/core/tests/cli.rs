use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use clap::Parser;
use lschain::cli::{Args, Settings};
use lschain::{run_blockdiag, RunReport};

fn lschain(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lschain"))
        .args(args)
        .arg("--out_dir")
        .arg(out)
        .env_remove("LSCHAIN_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn read(path: impl AsRef<Path>) -> String {
    fs::read_to_string(path).unwrap()
}

#[test]
fn run_report_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let flags = ["run", "--n_sites", "4", "--tau_re", "0.02", "--tau_im", "0.005", "--rng_seed", "7"];
    let out = lschain(&flags, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let settings = Settings::resolve(&Args::try_parse_from(["lschain"].iter().chain(&flags)).unwrap()).unwrap();
    let expected = run_blockdiag(&settings.chain_spec().unwrap(), &settings.engine).unwrap();
    let written: RunReport = serde_json::from_str(&read(dir.path().join("run_report.json"))).unwrap();
    assert_eq!(written.without_timing(), expected.without_timing());

    let csv = read(dir.path().join("per_length_norms.csv"));
    assert!(csv.starts_with("length,max_weighted_norm,decay_bound\n"));
    assert_eq!(csv.lines().count(), 1 + expected.per_length_norms.len());
}

#[test]
fn missing_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = lschain(&["run", "--config", "/nonexistent/lschain.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let serial = tempfile::tempdir().unwrap();
    let parallel = tempfile::tempdir().unwrap();
    let grid = ["sweep", "--n_sites", "3", "--grid_re_n", "3", "--grid_im_n", "2"];
    let a = lschain(&[&grid[..], &["--workers", "1"]].concat(), serial.path());
    let b = lschain(&[&grid[..], &["--workers", "4"]].concat(), parallel.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    let sa = read(serial.path().join("sweep.csv"));
    assert_eq!(sa, read(parallel.path().join("sweep.csv")));
    assert_eq!(sa.lines().count(), 7);
    assert!(sa.starts_with("re_tau,im_tau,re_E,im_E,gap_margin,converged\n"));
}

#[test]
fn single_point_sweep_equals_run() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = lschain(
        &[
            "sweep", "--n_sites", "3", "--grid_re_min", "0.015", "--grid_re_max", "0.015", "--grid_re_n", "1",
            "--grid_im_min", "-0.01", "--grid_im_max", "-0.01", "--grid_im_n", "1",
        ],
        dir.path(),
    );
    assert_eq!(sweep.status.code(), Some(0));
    let run = lschain(&["run", "--n_sites", "3", "--tau_re", "0.015", "--tau_im", "-0.01"], dir.path());
    assert_eq!(run.status.code(), Some(0));
    let report: RunReport = serde_json::from_str(&read(dir.path().join("run_report.json"))).unwrap();

    let mut rows = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap();
    let row = rows.records().next().unwrap().unwrap();
    let num = |i: usize| row[i].parse::<f64>().unwrap();
    assert_eq!((num(0), num(1)), (report.tau.re, report.tau.im));
    assert_eq!((num(2), num(3)), (report.e_n.re, report.e_n.im));
    assert_eq!(num(4), report.gap_margin);
    assert_eq!(&row[5], "true");
}

#[test]
fn failed_sweep_points_are_marked() {
    let dir = tempfile::tempdir().unwrap();
    let out = lschain(
        &["sweep", "--n_sites", "3", "--grid_re_min", "0.9", "--grid_re_max", "0.9", "--grid_re_n", "1", "--grid_im_n", "1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    let csv = read(dir.path().join("sweep.csv"));
    assert!(csv.lines().nth(1).unwrap().ends_with("nan,nan,nan,false"));
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = lschain(&["verify", "--n_sites", "4", "--tau_re", "0.02"], dir.path());
    assert_eq!(good.status.code(), Some(0), "{}", String::from_utf8_lossy(&good.stdout));
    let json = read(dir.path().join("verification_report.json"));
    assert!(json.contains("\"ground_state_energy\""));

    let bad = lschain(&["verify", "--n_sites", "4", "--tau_re", "0.9"], dir.path());
    assert_eq!(bad.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL engine_convergence"));
}

#[test]
fn engine_failure_in_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = lschain(&["run", "--n_sites", "4", "--tau_re", "0.9"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn estimate_t0_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let a = lschain(&["estimate-t0"], dir.path());
    let b = lschain(&["estimate-t0"], dir.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert!((v["a_root"].as_f64().unwrap() - 0.008952453637329537).abs() < 1e-15);
    assert_eq!(v["t0"].as_f64().unwrap(), v["a_root"].as_f64().unwrap() / 4.0);

    let bad = lschain(&["estimate-t0", "--delta", "-1"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn thermo_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = lschain(&["thermo", "--tau_re", "0.02", "--n_list", "3,4,5"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&read(dir.path().join("thermo_report.json"))).unwrap();
    assert_eq!(v["n_list"].as_array().unwrap().len(), 3);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "n_sites = 3\ntau_re = 0.01\n").unwrap();
    let out = lschain(&["run", "--config", cfg.to_str().unwrap(), "--tau_re", "0.02"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let report: RunReport = serde_json::from_str(&read(dir.path().join("run_report.json"))).unwrap();
    assert_eq!(report.n_sites, 3);
    assert_eq!(report.tau.re, 0.02);

    fs::write(&cfg, "n_sites = 3\nbogus = 1\n").unwrap();
    let out = lschain(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
}
