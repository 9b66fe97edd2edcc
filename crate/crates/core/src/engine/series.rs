//! One Lie-Schwinger step on a single interval: the generator `S` and the
//! block-diagonal remainder of the interval's own potential.

use serde::{Deserialize, Serialize};

use super::bounds::{bj_tail, lemma_delta};
use super::{EngineConfig, PotentialTable, StepIndex};
use crate::algebra::{
    operator_norm, pad_identity, padding_dims, reduced_resolvent, CMatrix, CVector, LocalOperator, LocalSpace,
    VacuumProjectors, C64, ZERO,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailMode {
    /// No truncation needed (`τ = 0` or vanishing potential).
    Exact,
    /// Remainder bounded by the `B_j` majorant.
    Majorant,
    /// Remainder extrapolated from the observed geometric decay of the terms.
    Empirical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesDiagnostics {
    pub step: StepIndex,
    pub j_used: usize,
    pub tail_estimate: f64,
    pub tail_mode: TailMode,
    /// Operator norm of the full generator `s`.
    pub s_norm: f64,
    pub v_diag_weighted_norm: f64,
    /// Gap constant `(1 − 8|τ| Σ (j+1)|τ|^{(j-1)/4})/2`; negative outside the
    /// small-coupling regime.
    pub delta: f64,
    /// `max_j ‖S_j‖ Δ / (2√2 ‖V_j‖_{H0})`; at most one when the per-term
    /// generator estimate holds. `None` when `Δ ≤ 0`.
    pub s_term_ratio: Option<f64>,
    pub resolvent_norm: f64,
    #[serde(with = "crate::numfmt::complex")]
    pub e: C64,
    /// `‖s + s†‖`; zero for real coupling.
    pub anti_hermitian_defect: f64,
    /// Distance from the vacuum energy to the rest of the spectrum of the
    /// interval Hamiltonian after the step.
    pub local_gap: f64,
    /// Most commutator terms used by any conjugation at this step.
    pub ad_terms: usize,
    pub neumann_deviation: Option<f64>,
}

/// Rank-two generator `S = u ω† − ω w†` with `u, w ⟂ ω`.
#[derive(Clone, Debug)]
struct RankTwo {
    u: CVector,
    w: CVector,
}

impl RankTwo {
    fn from_potential(vj: &CMatrix, r: &CMatrix, omega: &CVector) -> Self {
        let u = r * (vj * omega);
        let w = r.adjoint() * (vj.adjoint() * omega);
        RankTwo { u, w }
    }

    fn dense(&self, omega: &CVector) -> CMatrix {
        &self.u * omega.adjoint() - omega * self.w.adjoint()
    }

    /// `‖S‖ = max(|u|, |w|)` because `u` and `w` are orthogonal to `ω`.
    fn norm(&self) -> f64 {
        self.u.norm().max(self.w.norm())
    }

    /// `[S, X]` in `O(n²)`.
    fn commutator(&self, omega: &CVector, x: &CMatrix) -> CMatrix {
        let n = x.nrows();
        // S X = u (ω†X) − ω (w†X),  X S = (Xu) ω† − (Xω) w†
        let r1 = x.adjoint() * omega;
        let r2 = x.adjoint() * &self.w;
        let a = x * &self.u;
        let b = x * omega;
        let mut out = CMatrix::zeros(n, n);
        for j in 0..n {
            let (r1j, r2j) = (r1[j].conj(), r2[j].conj());
            let (oj, wj) = (omega[j].conj(), self.w[j].conj());
            let col = out.column_mut(j);
            for (i, o) in col.into_iter().enumerate() {
                *o = self.u[i] * r1j - omega[i] * r2j - a[i] * oj + b[i] * wj;
            }
        }
        out
    }
}

pub struct SeriesOutput {
    pub s: CMatrix,
    pub v_diag: CMatrix,
    pub diagnostics: SeriesDiagnostics,
}

/// `G = H0_I + τ Σ_{I' ⊊ I} V_{I'}` and its vacuum eigenvalue `E = τ Σ <V_{I'}>`.
pub fn build_g(
    table: &PotentialTable,
    step: StepIndex,
    space: &LocalSpace,
    residual_tol: f64,
) -> Result<(CMatrix, C64)> {
    let interval = step.interval();
    let d = space.local_dim();
    let tau = table.tau;
    let mut g = space.free_hamiltonian(interval).matrix;
    let mut e = ZERO;
    for (iv, m) in table.entries.iter().filter(|(iv, _)| interval.strictly_contains(iv)) {
        let residual = space.vacuum_projectors(*iv).off_diagonal_residual(m);
        if residual > residual_tol * m.norm().max(1.0) {
            return Err(Error::PreconditionViolated {
                step,
                interval: *iv,
                residual,
            });
        }
        let (dl, dr) = padding_dims(*iv, interval, d);
        g += pad_identity(&(m * tau), dl, dr);
        e += tau * table.expectation(iv);
    }
    let omega = space.vacuum_vector(interval);
    let residual = (&g * &omega - &omega * e).norm();
    if residual > residual_tol * g.norm().max(1.0) {
        return Err(Error::PreconditionViolated {
            step,
            interval,
            residual,
        });
    }
    Ok((g, e))
}

fn factorial(p: usize) -> f64 {
    (1..=p).map(|i| i as f64).product()
}

/// Generator `s = Σ τ^j S_j` and block-diagonal part
/// `Σ τ^{j-1}(P⁺V_jP⁺ + P⁻V_jP⁻)` for the potential `v` of the step interval.
///
/// Uses `V_1 = v` and, for `j ≥ 2`,
/// `V_j = Σ_{p≥2} Z_{p,j}/p! + [S_{j-1}, v]`, where `Z_{p,m}` is the `τ^m`
/// coefficient of `ad_S^p(G + τ v)`.
pub fn lie_schwinger_series(
    g: &CMatrix,
    e: C64,
    v: &LocalOperator,
    proj: &VacuumProjectors,
    space: &LocalSpace,
    cfg: &EngineConfig,
    step: StepIndex,
    a_root: f64,
) -> Result<SeriesOutput> {
    let n = proj.dim();
    let tau = cfg.tau;
    let tau_abs = tau.norm();
    let omega = &proj.vacuum;
    let delta = lemma_delta(tau_abs);
    let r = reduced_resolvent(g, e, ZERO, proj)?;
    let resolvent_norm = operator_norm(&r);

    let mut diagnostics = SeriesDiagnostics {
        step,
        j_used: 1,
        tail_estimate: 0.0,
        tail_mode: TailMode::Exact,
        s_norm: 0.0,
        v_diag_weighted_norm: 0.0,
        delta,
        s_term_ratio: None,
        resolvent_norm,
        e,
        anti_hermitian_defect: 0.0,
        local_gap: f64::NAN,
        ad_terms: 0,
        neumann_deviation: None,
    };
    let weighted = |m: &CMatrix| {
        space.weighted_norm(&LocalOperator {
            support: v.support,
            matrix: m.clone(),
        })
    };

    let v_is_zero = v.matrix.iter().all(|z| *z == ZERO);
    if v_is_zero || tau == ZERO {
        let v_diag = proj.diagonal_part(&v.matrix);
        diagnostics.v_diag_weighted_norm = weighted(&v_diag);
        return Ok(SeriesOutput {
            s: CMatrix::zeros(n, n),
            v_diag,
            diagnostics,
        });
    }

    let v_weighted = weighted(&v.matrix);
    let majorant_radius = a_root / (4.0 * v_weighted);
    let sqrt8 = 8f64.sqrt();

    let mut gens: Vec<RankTwo> = Vec::with_capacity(cfg.j_max);
    // z[m][p - 1] = Z_{p,m} for 1 ≤ p ≤ m
    let mut z: Vec<Vec<CMatrix>> = vec![Vec::new()];
    let mut contributions: Vec<f64> = Vec::with_capacity(cfg.j_max);
    let mut s = CMatrix::zeros(n, n);
    let mut s_u = CVector::zeros(n);
    let mut s_w = CVector::zeros(n);
    let mut v_diag = CMatrix::zeros(n, n);
    let mut ratio_max: f64 = 0.0;
    let mut tau_pow_prev = C64::new(1.0, 0.0); // τ^{j-1}

    for j in 1..=cfg.j_max {
        let mut row: Vec<CMatrix> = Vec::with_capacity(j);
        let (vj, sv_prev) = if j == 1 {
            (v.matrix.clone(), None)
        } else {
            // Z_{p,j} for p = 2..=j
            let mut higher: Vec<CMatrix> = Vec::with_capacity(j - 1);
            for p in 2..=j {
                let mut acc = CMatrix::zeros(n, n);
                for rr in 1..=(j - p + 1) {
                    let lower = &z[j - rr][p - 2];
                    acc += gens[rr - 1].commutator(omega, lower);
                }
                higher.push(acc);
            }
            let sv = gens[j - 2].commutator(omega, &v.matrix);
            let mut vj = sv.clone();
            for (offset, zp) in higher.iter().enumerate() {
                vj += zp * C64::new(1.0 / factorial(offset + 2), 0.0);
            }
            row.push(CMatrix::zeros(0, 0)); // placeholder for Z_{1,j}
            row.extend(higher);
            (vj, Some(sv))
        };

        let gen = RankTwo::from_potential(&vj, &r, omega);
        let mut z1 = gen.commutator(omega, g);
        if let Some(sv) = sv_prev {
            z1 += sv;
        }
        if row.is_empty() {
            row.push(z1);
        } else {
            row[0] = z1;
        }
        z.push(row);

        let tau_pow = tau_pow_prev * tau;
        s_u += &gen.u * tau_pow;
        s_w += &gen.w * tau_pow.conj();
        s += gen.dense(omega) * tau_pow;
        let diag_j = proj.diagonal_part(&vj);
        v_diag += &diag_j * tau_pow_prev;

        let s_j_norm = gen.norm();
        if delta > 0.0 {
            let wv = weighted(&vj);
            if wv > 0.0 {
                ratio_max = ratio_max.max(s_j_norm * delta / (sqrt8 * wv));
            }
        }
        contributions.push(tau_pow_prev.norm() * vj.norm() + tau_pow.norm() * (gen.u.norm_squared() + gen.w.norm_squared()).sqrt());
        gens.push(gen);
        tau_pow_prev = tau_pow;

        let empirical = empirical_tail(&contributions);
        let majorant = if tau_abs < majorant_radius {
            bj_tail(v_weighted, a_root, tau_abs, j).ok()
        } else {
            None
        };
        let (tail, mode) = match (majorant, empirical) {
            (Some(m), Some(e)) if m <= e => (m, TailMode::Majorant),
            (Some(m), None) => (m, TailMode::Majorant),
            (_, Some(e)) => (e, TailMode::Empirical),
            (None, None) => (f64::INFINITY, TailMode::Empirical),
        };
        diagnostics.j_used = j;
        diagnostics.tail_estimate = tail;
        diagnostics.tail_mode = mode;
        if tail <= cfg.tail_tol {
            break;
        }
        if j == cfg.j_max {
            return Err(Error::NonConvergence {
                step,
                terms: j,
                tail,
            });
        }
    }

    diagnostics.s_norm = s_u.norm().max(s_w.norm());
    diagnostics.v_diag_weighted_norm = weighted(&v_diag);
    diagnostics.s_term_ratio = (delta > 0.0).then_some(ratio_max);
    diagnostics.anti_hermitian_defect = (&s + s.adjoint()).norm();
    Ok(SeriesOutput { s, v_diag, diagnostics })
}

/// Remainder estimate from the last three term sizes, assuming geometric
/// decay at the worst observed ratio.
fn empirical_tail(terms: &[f64]) -> Option<f64> {
    let k = terms.len();
    if k < 3 {
        return None;
    }
    let (a, b, c) = (terms[k - 3], terms[k - 2], terms[k - 1]);
    if b == 0.0 && c == 0.0 {
        return Some(0.0);
    }
    if a == 0.0 || b == 0.0 {
        return None;
    }
    let rho = (b / a).max(c / b);
    (rho < 1.0).then(|| c * rho / (1.0 - rho))
}
