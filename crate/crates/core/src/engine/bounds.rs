//! Majorant coefficients `B_j`, the equation fixing the constant `a`, and
//! the small-coupling quantities entering the resolvent estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gap constant used when no better value is known.
pub const DEFAULT_DELTA: f64 = 0.5;

/// `B_1 = v`, `B_j = (1/a) Σ_{k=1}^{j-1} B_{j-k} B_k`; element `i` holds `B_{i+1}`.
pub fn bj_coefficients(v_norm: f64, a: f64, j_max: usize) -> Vec<f64> {
    let mut b: Vec<f64> = Vec::with_capacity(j_max);
    for j in 1..=j_max {
        if j == 1 {
            b.push(v_norm);
            continue;
        }
        let conv: f64 = (1..j).map(|k| b[j - k - 1] * b[k - 1]).sum();
        b.push(conv / a);
    }
    b
}

/// `f(x) = (a/2)(1 − √(1 − 4 v x / a))`, whose Taylor coefficients are `B_j`.
pub fn bj_generating_function(v_norm: f64, a: f64, x: f64) -> f64 {
    0.5 * a * (1.0 - (1.0 - 4.0 * v_norm * x / a).sqrt())
}

/// `Σ_{j' > j} |τ|^{j'-1} B_{j'}`.
///
/// This equals `f(|τ|)/|τ|` minus the partial sum; the remainder is summed
/// term by term from the closed form `B_j = a (v/a)^j Cat_{j-1}` so that small
/// tails do not drown in cancellation.
pub fn bj_tail(v_norm: f64, a: f64, tau_abs: f64, j: usize) -> Result<f64> {
    let radius = a / (4.0 * v_norm);
    if !(tau_abs < radius) {
        return Err(Error::OutOfDisk { tau_abs, radius });
    }
    if tau_abs == 0.0 {
        return Ok(0.0);
    }
    let x = v_norm * tau_abs / a;
    let ratio_bound = 4.0 * x;
    // term_j = |τ|^{j-1} B_j; term_1 = v, term_{j+1} = term_j · x · 2(2j-1)/(j+1)
    let mut term = v_norm;
    let mut idx = 1usize;
    while idx <= j {
        term *= x * 2.0 * (2 * idx - 1) as f64 / (idx + 1) as f64;
        idx += 1;
    }
    let mut tail = 0.0;
    loop {
        tail += term;
        let next = term * x * 2.0 * (2 * idx - 1) as f64 / (idx + 1) as f64;
        idx += 1;
        // the remaining terms are dominated by a geometric series of ratio 4x
        let rest = next / (1.0 - ratio_bound);
        if next == 0.0 || rest <= tail * 1e-17 {
            return Ok(tail + rest);
        }
        term = next;
    }
}

/// `e^{2ca} − 1 + (e^{2ca} − 2ca − 1)/a − 1`
pub fn a_equation(a: f64, c: f64) -> f64 {
    let y = 2.0 * c * a;
    let em1 = y.exp_m1();
    em1 + (em1 - y) / a - 1.0
}

/// Root of [`a_equation`] in `(lo, hi)` by bisection.
pub fn solve_a_equation(c: f64, lo: f64, hi: f64) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    let (f_lo, f_hi) = (a_equation(lo, c), a_equation(hi, c));
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::RootNotBracketed { lo, hi });
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if a_equation(mid, c) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if a_equation(lo, c).abs() <= a_equation(hi, c).abs() { lo } else { hi })
}

/// `Σ_{j≥1} (j+1) y^{j-1}` with `y = |τ|^{1/4}`, summed until the relative
/// tail falls below 1e-14. Infinite for `|τ| ≥ 1`.
pub fn lemma_sum(tau_abs: f64) -> f64 {
    let y = tau_abs.powf(0.25);
    if y >= 1.0 {
        return f64::INFINITY;
    }
    let mut sum = 0.0;
    let mut power = 1.0;
    let mut j = 1usize;
    loop {
        let term = (j + 1) as f64 * power;
        sum += term;
        // remaining terms: Σ_{i>j} (i+1) y^{i-1} ≤ term · ρ/(1-ρ) with ρ = y(j+2)/(j+1)
        let rho = y * (j + 2) as f64 / (j + 1) as f64;
        if rho < 1.0 && term * rho / (1.0 - rho) <= 1e-14 * sum {
            return sum;
        }
        power *= y;
        j += 1;
        if j > 1_000_000 {
            return sum;
        }
    }
}

/// `1 − 8|τ| Σ_{j≥1}(j+1)|τ|^{(j-1)/4}`
pub fn lemma_denominator(tau_abs: f64) -> f64 {
    1.0 - 8.0 * tau_abs * lemma_sum(tau_abs)
}

/// `Δ = (1 − 8|τ| Σ (j+1)|τ|^{(j-1)/4}) / 2`
pub fn lemma_delta(tau_abs: f64) -> f64 {
    0.5 * lemma_denominator(tau_abs)
}

/// `2 / (1 − 8|τ| Σ ...)` when the denominator is positive; `None` where the
/// estimate is vacuous.
pub fn resolvent_bound(tau_abs: f64) -> Option<f64> {
    let den = lemma_denominator(tau_abs);
    (den > 0.0).then(|| 2.0 / den)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauDomainEstimate {
    pub t0: f64,
    pub a_root: f64,
    pub c: f64,
    pub delta: f64,
    /// `|a_equation(a_root)|`
    pub residual: f64,
    /// `1 − 8 t0 Σ (j+1) t0^{(j-1)/4}`
    pub lemma_denominator: f64,
    /// Half of the denominator, the gap constant reached at `t0`.
    pub delta_at_t0: f64,
    /// Whether the resolvent estimate is non-vacuous at `t0`.
    pub self_consistent: bool,
}

/// Solve for `a` with `c = (2 + √2)/Δ` and return `t0 = a/4`.
pub fn tau_domain_estimate(delta: f64) -> Result<TauDomainEstimate> {
    if !(delta > 0.0) {
        return Err(Error::Config(format!("delta must be positive, got {delta}")));
    }
    let c = (2.0 + 2f64.sqrt()) / delta;
    // a_equation → -1 as a → 0 and grows like e^{2ca} for large a
    let hi = (2.0 / c).max(1.0);
    let a_root = solve_a_equation(c, 1e-300, hi)?;
    let t0 = a_root / 4.0;
    let den = lemma_denominator(t0);
    Ok(TauDomainEstimate {
        t0,
        a_root,
        c,
        delta,
        residual: a_equation(a_root, c).abs(),
        lemma_denominator: den,
        delta_at_t0: 0.5 * den,
        self_consistent: den > 0.0,
    })
}
