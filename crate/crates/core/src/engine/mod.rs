//! The block-diagonalization sweep over interval steps `(k, q)`.

mod alpha;
mod bounds;
mod run;
mod series;
mod table;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use alpha::{apply_alpha, conjugate_series, AlphaStats};
pub use bounds::{
    a_equation, bj_coefficients, bj_generating_function, bj_tail, lemma_delta, lemma_denominator, lemma_sum,
    resolvent_bound, solve_a_equation, tau_domain_estimate, TauDomainEstimate, DEFAULT_DELTA,
};
pub use run::{run_blockdiag, BlockDiagonalizer, Checkpoint, LengthNorm, RunReport, StepOutcome};
pub use series::{build_g, lie_schwinger_series, SeriesDiagnostics, SeriesOutput, TailMode};
pub use table::{IntervalValue, PotentialTable};

use crate::algebra::{IntervalSupport, C64};
use crate::error::{Error, Result};

/// Step `(k, q)`: the interval with `k` edges starting at site `q`.
///
/// `(0, N)` is the initial index before any step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StepIndex {
    pub k: usize,
    pub q: usize,
}

impl StepIndex {
    pub const fn new(k: usize, q: usize) -> Self {
        StepIndex { k, q }
    }

    pub const fn initial(n_sites: usize) -> Self {
        StepIndex { k: 0, q: n_sites }
    }

    pub fn is_initial(&self) -> bool {
        self.k == 0
    }

    pub fn interval(&self) -> IntervalSupport {
        IntervalSupport::new(self.q, self.k)
    }

    /// The step processed just before this one on a chain of `n_sites`.
    pub fn predecessor(&self, n_sites: usize) -> Option<StepIndex> {
        match (self.k, self.q) {
            (0, _) => None,
            (1, 1) => Some(StepIndex::initial(n_sites)),
            (k, 1) => Some(StepIndex::new(k - 1, n_sites - k + 1)),
            (k, q) => Some(StepIndex::new(k, q - 1)),
        }
    }

    /// The step after this one, or `None` after the last step `(N-1, 1)`.
    pub fn successor(&self, n_sites: usize) -> Option<StepIndex> {
        if self.k == 0 {
            return (n_sites >= 2).then_some(StepIndex::new(1, 1));
        }
        if self.q < n_sites - self.k {
            Some(StepIndex::new(self.k, self.q + 1))
        } else if self.k + 1 < n_sites {
            Some(StepIndex::new(self.k + 1, 1))
        } else {
            None
        }
    }
}

impl fmt::Display for StepIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.k, self.q)
    }
}

/// All steps for a chain of `n` sites, in processing order.
pub fn step_sequence(n: usize) -> Vec<StepIndex> {
    (1..n)
        .flat_map(|k| (1..=n - k).map(move |q| StepIndex::new(k, q)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    #[serde(with = "crate::numfmt::complex")]
    pub tau: C64,
    pub j_max: usize,
    pub tail_tol: f64,
    pub residual_tol: f64,
    /// Accumulate the full-chain conjugation `U_N`.
    pub track_u: bool,
    /// Cross-check every reduced resolvent against its Neumann expansion.
    pub neumann_check: bool,
    /// Row cap for full-chain matrices.
    pub dim_cap: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            tau: C64::new(0.0, 0.0),
            j_max: 40,
            tail_tol: 1e-14,
            residual_tol: 1e-10,
            track_u: false,
            neumann_check: false,
            dim_cap: crate::models::DEFAULT_DIM_CAP,
        }
    }
}

impl EngineConfig {
    pub fn with_tau(tau: C64) -> Self {
        EngineConfig {
            tau,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.j_max < 1 {
            return Err(Error::Config("j_max must be at least 1".into()));
        }
        if !(self.tail_tol > 0.0) || !(self.residual_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if !self.tau.re.is_finite() || !self.tau.im.is_finite() {
            return Err(Error::Config("tau must be finite".into()));
        }
        Ok(())
    }
}
