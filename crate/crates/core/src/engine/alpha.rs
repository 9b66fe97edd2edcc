//! Table update after a conjugation `e^S (·) e^{-S}` on the step interval.

use rayon::prelude::*;

use super::{PotentialTable, StepIndex};
use crate::algebra::{pad_identity, padding_dims, CMatrix, IntervalSupport, LocalSpace, Placement, C64, ZERO};
use crate::error::{Error, Result};

const MAX_AD_TERMS: usize = 200;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AlphaStats {
    pub conjugated: usize,
    pub contributions: usize,
    pub max_terms: usize,
}

/// `Σ_{n≥1} ad_S^n(x)/n!` with `S` acting on the `inner` factor of the
/// `outer` space that `x` lives on, i.e. `e^S x e^{-S} − x`.
///
/// Stops once `‖X_n‖_F · ρ/(1−ρ) ≤ tail_tol` with `ρ = 2‖S‖_F/(n+1)`, which
/// bounds every later term.
pub fn conjugate_series(
    s: &CMatrix,
    inner: IntervalSupport,
    outer: IntervalSupport,
    x: &CMatrix,
    d: usize,
    tail_tol: f64,
    step: StepIndex,
) -> Result<(CMatrix, usize)> {
    let placement = Placement::new(inner, outer, d);
    let s_norm = s.norm();
    let mut acc = CMatrix::zeros(x.nrows(), x.ncols());
    if s_norm == 0.0 {
        return Ok((acc, 0));
    }
    let mut term = x.clone();
    for n in 1..=MAX_AD_TERMS {
        term = placement.commutator(s, &term) * C64::new(1.0 / n as f64, 0.0);
        acc += &term;
        let size = term.norm();
        let rho = 2.0 * s_norm / (n + 1) as f64;
        if size == 0.0 || (rho < 1.0 && size * rho / (1.0 - rho) <= tail_tol) {
            return Ok((acc, n));
        }
        if !size.is_finite() {
            break;
        }
    }
    Err(Error::NonConvergence {
        step,
        terms: MAX_AD_TERMS,
        tail: f64::INFINITY,
    })
}

enum Update {
    Keep,
    Replace(CMatrix, usize),
    /// `e^S V e^{-S} − V` for a partially overlapping entry, to be added to
    /// the entry on the union.
    Contribute(IntervalSupport, CMatrix, usize),
}

/// New table after step `(k, q)`:
///
/// - entries disjoint from `I_{k,q}`, inside it, or overlapping it while
///   reaching past only one end keep their matrix;
/// - `I_{k,q}` itself becomes `v_diag`;
/// - entries strictly containing `I_{k,q}` are conjugated;
/// - an overlapping entry `V'` adds `e^S V' e^{-S} − V'` to the entry on
///   `I' ∪ I_{k,q}`.
///
/// All updates read the previous table.
pub fn apply_alpha(
    table: &PotentialTable,
    step: StepIndex,
    s: &CMatrix,
    v_diag: &CMatrix,
    space: &LocalSpace,
    tail_tol: f64,
) -> Result<(PotentialTable, AlphaStats)> {
    let interval = step.interval();
    let d = space.local_dim();
    let s_is_zero = s.iter().all(|z| *z == ZERO);

    let items: Vec<(&IntervalSupport, &CMatrix)> = table.entries.iter().collect();
    let updates: Vec<Result<Update>> = items
        .par_iter()
        .map(|(iv, m)| {
            let iv = **iv;
            if iv == interval {
                return Ok(Update::Replace(v_diag.clone(), 0));
            }
            if s_is_zero {
                return Ok(Update::Keep);
            }
            if iv.strictly_contains(&interval) {
                let (delta, terms) = conjugate_series(s, interval, iv, m, d, tail_tol, step)?;
                return Ok(Update::Replace(*m + delta, terms));
            }
            if iv.overlaps_partially(&interval) {
                let hull = iv.hull(&interval);
                let (dl, dr) = padding_dims(iv, hull, d);
                let embedded = pad_identity(m, dl, dr);
                let (delta, terms) = conjugate_series(s, interval, hull, &embedded, d, tail_tol, step)?;
                return Ok(Update::Contribute(hull, delta, terms));
            }
            Ok(Update::Keep)
        })
        .collect();

    let mut next = table.clone();
    next.step = step;
    let mut stats = AlphaStats::default();
    let mut changed: Vec<IntervalSupport> = Vec::new();
    let mut pending: Vec<(IntervalSupport, CMatrix)> = Vec::new();
    for ((iv, _), update) in items.iter().zip(updates) {
        match update? {
            Update::Keep => {}
            Update::Replace(m, terms) => {
                next.entries.insert(**iv, m);
                changed.push(**iv);
                if **iv != interval {
                    stats.conjugated += 1;
                }
                stats.max_terms = stats.max_terms.max(terms);
            }
            Update::Contribute(hull, delta, terms) => {
                pending.push((hull, delta));
                stats.contributions += 1;
                stats.max_terms = stats.max_terms.max(terms);
            }
        }
    }
    for (hull, delta) in pending {
        let entry = next
            .entries
            .get_mut(&hull)
            .ok_or(Error::InvalidInterval {
                interval: hull,
                n_sites: table.n_sites,
            })?;
        *entry += delta;
        changed.push(hull);
    }
    changed.sort();
    changed.dedup();
    for iv in changed {
        next.refresh_expectation(iv, space);
    }
    Ok((next, stats))
}
