//! Command-line front end: configuration merging, sweeps and artifact files.

mod commands;
mod config;

use std::ffi::OsString;

use clap::Parser;

pub use commands::{cmd_estimate_t0, cmd_run, cmd_sweep, cmd_thermo, cmd_verify, sweep_rows, write_sweep_csv, SweepRow};
pub use config::{Args, Command, FileConfig, GridKind, ModelChoice, Settings, OUT_DIR_ENV};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_ENGINE: i32 = 2;
pub const EXIT_SWEEP_FAILED: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;
pub const EXIT_ROOT: i32 = 5;

/// Exit code for an error that ends a command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidSpec(_) | Error::Io { .. } | Error::Serde(_) | Error::DimensionCap { .. } => {
            EXIT_CONFIG
        }
        Error::RootNotBracketed { .. } => EXIT_ROOT,
        _ => EXIT_ENGINE,
    }
}

/// Parse arguments, run the command and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let settings = match Settings::resolve(&args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(settings.workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_CONFIG;
        }
    };
    pool.install(|| match args.command {
        Command::Run => cmd_run(&settings),
        Command::Sweep => cmd_sweep(&settings),
        Command::Verify => cmd_verify(&settings),
        Command::Thermo => cmd_thermo(&settings),
        Command::EstimateT0 => cmd_estimate_t0(&settings),
    })
}
