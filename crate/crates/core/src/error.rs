use std::path::PathBuf;

use thiserror::Error;

use crate::algebra::IntervalSupport;
use crate::engine::StepIndex;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("support {inner} is not contained in {outer}")]
    SupportNotContained {
        inner: IntervalSupport,
        outer: IntervalSupport,
    },

    #[error("interval {interval} does not fit a chain of {n_sites} sites")]
    InvalidInterval {
        interval: IntervalSupport,
        n_sites: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("restricted operator is singular (reciprocal condition {rcond:.3e})")]
    SingularRestriction { rcond: f64 },

    #[error("matrix exponential overflow (norm {norm:.3e})")]
    ExpOverflow { norm: f64 },

    #[error("ground state is degenerate (gap {gap:.3e})")]
    DegenerateGround { gap: f64 },

    #[error("invalid chain spec: {0}")]
    InvalidSpec(String),

    #[error("dimension {dim} exceeds the cap of {cap} rows")]
    DimensionCap { dim: usize, cap: usize },

    #[error("sub-interval {interval} is not block-diagonal at step {step} (residual {residual:.3e})")]
    PreconditionViolated {
        step: StepIndex,
        interval: IntervalSupport,
        residual: f64,
    },

    #[error("series did not converge at step {step} after {terms} terms (tail {tail:.3e})")]
    NonConvergence {
        step: StepIndex,
        terms: usize,
        tail: f64,
    },

    #[error("|tau| = {tau_abs} lies outside the majorant disk of radius {radius}")]
    OutOfDisk { tau_abs: f64, radius: f64 },

    #[error("expansion diverges (operator norm {norm:.3e} of the iterated term)")]
    NeumannDivergence { norm: f64 },

    #[error("root not bracketed on [{lo}, {hi}]")]
    RootNotBracketed { lo: f64, hi: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
