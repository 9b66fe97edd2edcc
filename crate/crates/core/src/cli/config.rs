use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Deserialize;

use crate::algebra::C64;
use crate::engine::{tau_domain_estimate, EngineConfig, DEFAULT_DELTA};
use crate::error::{Error, Result};
use crate::models::{build_anharmonic_model, ChainSpec, SpinCoupling, SpinModel, DEFAULT_DIM_CAP};

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "LSCHAIN_OUT_DIR";

const DEFAULT_OUT_DIR: &str = "lschain_out";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Block-diagonalize one chain at one coupling.
    Run,
    /// Run over a grid of couplings and write sweep.csv.
    Sweep,
    /// Run the check suite and write verification_report.json.
    Verify,
    /// Energies per site over a ladder of chain lengths.
    Thermo,
    /// Solve for the analyticity radius estimate and print it.
    #[value(name = "estimate-t0")]
    EstimateT0,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    Spin,
    Anharmonic,
    /// Read a chain spec from `spec_file`.
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    /// Rectangle in the coupling plane, imaginary axis fastest.
    Rect,
    /// Equispaced points on a circle around the origin.
    Circle,
}

/// Every key of the config file. Flags of the same name override them.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<ModelChoice>,
    pub spec_file: Option<PathBuf>,
    pub n_sites: Option<usize>,
    pub local_dim: Option<usize>,
    pub d_trunc: Option<usize>,
    pub rng_seed: Option<u64>,
    pub kbar: Option<usize>,
    pub tau_re: Option<f64>,
    pub tau_im: Option<f64>,
    pub grid: Option<GridKind>,
    pub grid_re_min: Option<f64>,
    pub grid_re_max: Option<f64>,
    pub grid_re_n: Option<usize>,
    pub grid_im_min: Option<f64>,
    pub grid_im_max: Option<f64>,
    pub grid_im_n: Option<usize>,
    pub circle_radius: Option<f64>,
    pub circle_points: Option<usize>,
    pub j_max: Option<usize>,
    pub tail_tol: Option<f64>,
    pub residual_tol: Option<f64>,
    pub track_u: Option<bool>,
    pub neumann_check: Option<bool>,
    pub dim_cap: Option<usize>,
    pub n_list: Option<Vec<usize>>,
    pub delta: Option<f64>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

macro_rules! flag_struct {
    ($($(#[$meta:meta])* $name:ident : $ty:ty),* $(,)?) => {
        /// Block-diagonalization of gapped quantum chains with a complex coupling.
        #[derive(Clone, Debug, Parser)]
        #[command(name = "lschain", version, allow_negative_numbers = true)]
        pub struct Args {
            pub command: Command,
            /// TOML file with any of the keys below.
            #[arg(long)]
            pub config: Option<PathBuf>,
            $(
                $(#[$meta])*
                #[arg(long = stringify!($name))]
                pub $name: Option<$ty>,
            )*
        }
    };
}

flag_struct! {
    /// spin (default), anharmonic or custom
    model: ModelChoice,
    /// Chain spec JSON, required for the custom model.
    spec_file: PathBuf,
    /// Number of sites (default 4).
    n_sites: usize,
    /// Local dimension of the spin model (default 2).
    local_dim: usize,
    /// Oscillator truncation of the anharmonic model (default 4).
    d_trunc: usize,
    /// Seed of the random spin couplings (default 0).
    rng_seed: u64,
    /// Longest seeded interval in edges, 1 or 2 (default 1).
    kbar: usize,
    /// Real part of the coupling (default 0).
    tau_re: f64,
    /// Imaginary part of the coupling (default 0).
    tau_im: f64,
    /// Sweep grid shape: rect (default) or circle.
    grid: GridKind,
    /// Rect grid, real axis (default -0.002).
    grid_re_min: f64,
    /// Rect grid, real axis (default 0.002).
    grid_re_max: f64,
    /// Rect grid, points on the real axis (default 5).
    grid_re_n: usize,
    /// Rect grid, imaginary axis (default -0.002).
    grid_im_min: f64,
    /// Rect grid, imaginary axis (default 0.002).
    grid_im_max: f64,
    /// Rect grid, points on the imaginary axis (default 5).
    grid_im_n: usize,
    /// Circle grid radius (default t0/2).
    circle_radius: f64,
    /// Circle grid points (default 64).
    circle_points: usize,
    /// Most series orders per step (default 40).
    j_max: usize,
    /// Truncation tolerance of every series (default 1e-14).
    tail_tol: f64,
    /// Block-diagonality tolerance (default 1e-10).
    residual_tol: f64,
    /// Accumulate the full-chain conjugation (default false).
    #[arg(num_args = 0..=1, default_missing_value = "true")]
    track_u: bool,
    /// Compare every reduced resolvent with its expansion (default false).
    #[arg(num_args = 0..=1, default_missing_value = "true")]
    neumann_check: bool,
    /// Row cap for full-chain matrices (default 4096).
    dim_cap: usize,
    /// Chain lengths for thermo, comma separated (default 3,4,5,6,7).
    #[arg(value_delimiter = ',')]
    n_list: Vec<usize>,
    /// Gap constant for estimate-t0 (default 0.5).
    delta: f64,
    /// Worker threads, 0 for one per core (default 0).
    workers: usize,
    /// Output directory (default $LSCHAIN_OUT_DIR, else ./lschain_out).
    out_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub kind: GridKind,
    pub re: (f64, f64, usize),
    pub im: (f64, f64, usize),
    pub radius: f64,
    pub points: usize,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

impl GridSpec {
    /// Grid points in row order: real part outer, imaginary part fastest
    /// for rectangles; increasing angle for circles.
    pub fn points(&self) -> Vec<C64> {
        match self.kind {
            GridKind::Rect => {
                let ims = linspace(self.im.0, self.im.1, self.im.2);
                linspace(self.re.0, self.re.1, self.re.2)
                    .into_iter()
                    .flat_map(|re| ims.iter().map(move |&im| C64::new(re, im)))
                    .collect()
            }
            GridKind::Circle => (0..self.points)
                .map(|p| C64::from_polar(self.radius, 2.0 * std::f64::consts::PI * p as f64 / self.points as f64))
                .collect(),
        }
    }
}

/// Fully resolved settings: flag, then file, then default.
#[derive(Clone, Debug)]
pub struct Settings {
    pub model: ModelChoice,
    pub spec_file: Option<PathBuf>,
    pub n_sites: Option<usize>,
    pub local_dim: usize,
    pub d_trunc: usize,
    pub rng_seed: u64,
    pub kbar: usize,
    pub engine: EngineConfig,
    pub grid: GridSpec,
    pub n_list: Vec<usize>,
    pub delta: f64,
    pub workers: usize,
    pub out_dir: PathBuf,
}

impl Settings {
    pub fn resolve(args: &Args) -> Result<Settings> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        macro_rules! pick {
            ($name:ident, $default:expr) => {
                args.$name.clone().or(file.$name.clone()).unwrap_or_else(|| $default)
            };
        }
        let tau = C64::new(pick!(tau_re, 0.0), pick!(tau_im, 0.0));
        let engine = EngineConfig {
            tau,
            j_max: pick!(j_max, 40),
            tail_tol: pick!(tail_tol, 1e-14),
            residual_tol: pick!(residual_tol, 1e-10),
            track_u: pick!(track_u, false),
            neumann_check: pick!(neumann_check, false),
            dim_cap: pick!(dim_cap, DEFAULT_DIM_CAP),
        };
        engine.validate()?;
        let radius = match args.circle_radius.or(file.circle_radius) {
            Some(r) => r,
            None => tau_domain_estimate(DEFAULT_DELTA)?.t0 / 2.0,
        };
        let grid = GridSpec {
            kind: pick!(grid, GridKind::Rect),
            re: (pick!(grid_re_min, -0.002), pick!(grid_re_max, 0.002), pick!(grid_re_n, 5)),
            im: (pick!(grid_im_min, -0.002), pick!(grid_im_max, 0.002), pick!(grid_im_n, 5)),
            radius,
            points: pick!(circle_points, 64),
        };
        let out_dir = args
            .out_dir
            .clone()
            .or(file.out_dir.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
        let settings = Settings {
            model: pick!(model, ModelChoice::Spin),
            spec_file: args.spec_file.clone().or(file.spec_file.clone()),
            n_sites: args.n_sites.or(file.n_sites),
            local_dim: pick!(local_dim, 2),
            d_trunc: pick!(d_trunc, 4),
            rng_seed: pick!(rng_seed, 0),
            kbar: pick!(kbar, 1),
            engine,
            grid,
            n_list: pick!(n_list, vec![3, 4, 5, 6, 7]),
            delta: pick!(delta, DEFAULT_DELTA),
            workers: pick!(workers, 0),
            out_dir,
        };
        settings.validate()?;
        Ok(settings)
    }

    fn validate(&self) -> Result<()> {
        let g = &self.grid;
        match g.kind {
            GridKind::Rect => {
                if g.re.2 == 0 || g.im.2 == 0 {
                    return Err(Error::Config("grid point counts must be positive".into()));
                }
                if !(g.re.0 <= g.re.1) || !(g.im.0 <= g.im.1) {
                    return Err(Error::Config("grid minimum exceeds maximum".into()));
                }
            }
            GridKind::Circle => {
                if g.points == 0 || !(g.radius >= 0.0) {
                    return Err(Error::Config("circle grid needs points > 0 and radius >= 0".into()));
                }
            }
        }
        if self.n_list.is_empty() {
            return Err(Error::Config("n_list must not be empty".into()));
        }
        if self.model == ModelChoice::Custom && self.spec_file.is_none() {
            return Err(Error::Config("the custom model needs spec_file".into()));
        }
        Ok(())
    }

    /// Chain spec for the configured model, at `n_sites` if given.
    pub fn chain_spec(&self) -> Result<ChainSpec> {
        let n = self.n_sites.unwrap_or(4);
        match self.model {
            ModelChoice::Spin => SpinModel {
                d: self.local_dim,
                n_sites: n,
                rng_seed: self.rng_seed,
                kbar: self.kbar,
                coupling: SpinCoupling::Random,
            }
            .build(),
            ModelChoice::Anharmonic => build_anharmonic_model(self.d_trunc, n),
            ModelChoice::Custom => {
                let path = self.spec_file.as_ref().expect("validated");
                let spec = ChainSpec::load(path)?;
                Ok(match self.n_sites {
                    Some(n) => spec.with_n_sites(n),
                    None => spec,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Args {
        Args::try_parse_from(std::iter::once("lschain").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn defaults() {
        let s = Settings::resolve(&parse(&["run", "--out_dir", "x"])).unwrap();
        assert_eq!(s.model, ModelChoice::Spin);
        assert_eq!(s.engine, EngineConfig::default());
        assert_eq!(s.chain_spec().unwrap().n_sites, 4);
        assert_eq!(s.n_list, vec![3, 4, 5, 6, 7]);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "n_sites = 5\ntau_re = 0.01\ntrack_u = true\nn_list = [3, 4]\n").unwrap();
        let s = Settings::resolve(&parse(&[
            "run",
            "--config",
            path.to_str().unwrap(),
            "--tau_re",
            "0.02",
            "--n_list",
            "5,6",
        ]))
        .unwrap();
        assert_eq!(s.n_sites, Some(5));
        assert_eq!(s.engine.tau, C64::new(0.02, 0.0));
        assert!(s.engine.track_u);
        assert_eq!(s.n_list, vec![5, 6]);
        let s = Settings::resolve(&parse(&["run", "--config", path.to_str().unwrap(), "--track_u", "false"])).unwrap();
        assert!(!s.engine.track_u);
    }

    #[test]
    fn unknown_file_keys_and_missing_files_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "n_site = 5\n").unwrap();
        assert!(Settings::resolve(&parse(&["run", "--config", path.to_str().unwrap()])).is_err());
        let missing = dir.path().join("nope.toml");
        assert!(matches!(
            Settings::resolve(&parse(&["run", "--config", missing.to_str().unwrap()])),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn rect_grid_order_is_imaginary_fastest() {
        let s = Settings::resolve(&parse(&[
            "sweep",
            "--grid_re_n",
            "2",
            "--grid_im_n",
            "3",
            "--grid_re_min",
            "0",
            "--grid_re_max",
            "1",
            "--grid_im_min",
            "-1",
            "--grid_im_max",
            "1",
        ]))
        .unwrap();
        let pts = s.grid.points();
        let expected = [(0.0, -1.0), (0.0, 0.0), (0.0, 1.0), (1.0, -1.0), (1.0, 0.0), (1.0, 1.0)];
        assert_eq!(pts, expected.iter().map(|&(r, i)| C64::new(r, i)).collect::<Vec<_>>());
    }

    #[test]
    fn empty_grid_is_rejected() {
        assert!(Settings::resolve(&parse(&["sweep", "--grid_re_n", "0"])).is_err());
    }
}
