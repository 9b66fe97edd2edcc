use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::{exit_code, Settings, EXIT_CHECK_FAILED, EXIT_OK, EXIT_SWEEP_FAILED};
use crate::algebra::C64;
use crate::engine::{run_blockdiag, tau_domain_estimate, EngineConfig, RunReport};
use crate::error::{Error, Result};
use crate::models::ChainSpec;
use crate::numfmt::{self, fmt17};
use crate::verify::{run_verification, thermo_analysis};

fn fmt_c(z: C64) -> String {
    format!("({}, {})", fmt17(z.re), fmt17(z.im))
}

fn fail(err: Error) -> i32 {
    eprintln!("error: {err}");
    exit_code(&err)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))
}

fn csv_writer(dir: &Path, name: &str) -> Result<(csv::Writer<fs::File>, std::path::PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    let writer = csv::Writer::from_path(&path).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))?;
    Ok((writer, path))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Serde(format!("{}: {e}", path.display()))
}

fn write_length_norms(dir: &Path, report: &RunReport) -> Result<()> {
    let (mut w, path) = csv_writer(dir, "per_length_norms.csv")?;
    w.write_record(["length", "max_weighted_norm", "decay_bound"]).map_err(csv_err(&path))?;
    for l in &report.per_length_norms {
        w.write_record([l.edges.to_string(), fmt17(l.max_weighted_norm), fmt17(l.decay_bound)])
            .map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

/// `run`: writes `run_report.json` and `per_length_norms.csv`.
pub fn cmd_run(settings: &Settings) -> i32 {
    let result = settings.chain_spec().and_then(|spec| {
        let report = run_blockdiag(&spec, &settings.engine)?;
        write_file(&settings.out_dir, "run_report.json", &report.to_json()?)?;
        write_length_norms(&settings.out_dir, &report)?;
        Ok(report)
    });
    match result {
        Ok(report) => {
            println!(
                "N={} tau={} E_N={} gap_margin={}",
                report.n_sites,
                fmt_c(report.tau),
                fmt_c(report.e_n),
                fmt17(report.gap_margin)
            );
            EXIT_OK
        }
        Err(e) => fail(e),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub tau: C64,
    /// `None` when the engine failed at this point.
    pub result: Option<(C64, f64)>,
}

/// One engine run per point, in parallel; rows keep the order of `points`.
pub fn sweep_rows(spec: &ChainSpec, cfg: &EngineConfig, points: &[C64]) -> Vec<SweepRow> {
    points
        .par_iter()
        .map(|&tau| {
            let run = run_blockdiag(spec, &EngineConfig { tau, ..cfg.clone() });
            SweepRow {
                tau,
                result: run.ok().map(|r| (r.e_n, r.gap_margin)),
            }
        })
        .collect()
}

pub fn write_sweep_csv(dir: &Path, rows: &[SweepRow]) -> Result<()> {
    let (mut w, path) = csv_writer(dir, "sweep.csv")?;
    w.write_record(["re_tau", "im_tau", "re_E", "im_E", "gap_margin", "converged"])
        .map_err(csv_err(&path))?;
    for row in rows {
        let (e, gap, ok) = match row.result {
            Some((e, gap)) => (e, gap, true),
            None => (C64::new(f64::NAN, f64::NAN), f64::NAN, false),
        };
        w.write_record([
            fmt17(row.tau.re),
            fmt17(row.tau.im),
            fmt17(e.re),
            fmt17(e.im),
            fmt17(gap),
            ok.to_string(),
        ])
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

/// `sweep`: writes `sweep.csv`; fails only when every point failed.
pub fn cmd_sweep(settings: &Settings) -> i32 {
    let spec = match settings.chain_spec() {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let rows = sweep_rows(&spec, &settings.engine, &settings.grid.points());
    if let Err(e) = write_sweep_csv(&settings.out_dir, &rows) {
        return fail(e);
    }
    let converged = rows.iter().filter(|r| r.result.is_some()).count();
    println!("{converged} of {} grid points converged", rows.len());
    if converged == 0 {
        EXIT_SWEEP_FAILED
    } else {
        EXIT_OK
    }
}

/// `verify`: writes `verification_report.json`; exit 4 if a hard check fails.
pub fn cmd_verify(settings: &Settings) -> i32 {
    let result = settings.chain_spec().and_then(|spec| {
        let report = run_verification(&spec, &settings.engine)?;
        write_file(&settings.out_dir, "verification_report.json", &report.to_json()?)?;
        Ok(report)
    });
    let report = match result {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    for r in &report.records {
        let status = if r.pass { "PASS" } else { "FAIL" };
        let kind = if r.hard { "" } else { " (soft)" };
        let num = |x: Option<f64>| x.map_or_else(|| "-".to_owned(), fmt17);
        println!("{status} {}{kind} measured={} bound={}", r.name, num(r.measured), num(r.bound));
    }
    if report.passed {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

/// `thermo`: writes `thermo_report.json`.
pub fn cmd_thermo(settings: &Settings) -> i32 {
    let result = settings.chain_spec().and_then(|spec| {
        let report = thermo_analysis(&spec, &settings.engine, &settings.n_list)?;
        write_file(&settings.out_dir, "thermo_report.json", &numfmt::to_json(&report)?)?;
        Ok(report)
    });
    match result {
        Ok(report) => {
            for (n, e) in report.n_list.iter().zip(&report.per_site) {
                println!("N={n} E_N/N={}", fmt_c(*e));
            }
            println!(
                "pairs below majorant: {}; max decomposition residual {}; site spread {}",
                report.all_pairs_below(),
                fmt17(report.decomposition_residuals.iter().copied().fold(0.0, f64::max)),
                fmt17(report.site_spread)
            );
            EXIT_OK
        }
        Err(e) => fail(e),
    }
}

/// `estimate-t0`: prints the estimate as JSON.
pub fn cmd_estimate_t0(settings: &Settings) -> i32 {
    match tau_domain_estimate(settings.delta).and_then(|est| numfmt::to_json(&est)) {
        Ok(json) => {
            print!("{json}");
            EXIT_OK
        }
        Err(e) => fail(e),
    }
}
