//! Reduced resolvent from its expansion around the free Hamiltonian,
//! as an independent check on the direct solve.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::algebra::{
    complement_block, operator_norm, pad_identity, padding_dims, reduced_resolvent, CMatrix, LocalSpace,
    VacuumProjectors, C64,
};
use crate::engine::{resolvent_bound, PotentialTable, StepIndex};
use crate::error::{Error, Result};

const MAX_NEUMANN_TERMS: usize = 2000;

/// `τ Σ_{I' ⊊ I} P⁺_{I'} (V_{I'} − <V_{I'}>) P⁺_{I'}`, embedded in the step
/// interval `I`.
pub fn neumann_perturbation(table: &PotentialTable, step: StepIndex, space: &LocalSpace) -> CMatrix {
    let interval = step.interval();
    let d = space.local_dim();
    let dim = interval.dim(d);
    let mut out = CMatrix::zeros(dim, dim);
    for (iv, m) in table.entries.iter().filter(|(iv, _)| interval.strictly_contains(iv)) {
        let proj = space.vacuum_projectors(*iv);
        let n = m.nrows();
        let centered = m - CMatrix::identity(n, n) * table.expectation(iv);
        let sandwiched = &proj.p_plus * centered * &proj.p_plus;
        let (dl, dr) = padding_dims(*iv, interval, d);
        out += pad_identity(&(sandwiched * table.tau), dl, dr);
    }
    out
}

/// `B^{-1/2} Σ_l (−B^{-1/2} W B^{-1/2})^l B^{-1/2}` with `B = P⁺(H0 − z)P⁺`
/// and `W = P⁺ pert P⁺`, i.e. the inverse of `P⁺(H0 + pert − z)P⁺` on the
/// range of `P⁺`, extended by zero on the vacuum. Returns the matrix and
/// the number of terms summed.
pub fn neumann_resolvent(
    h0: &CMatrix,
    pert: &CMatrix,
    z: C64,
    proj: &VacuumProjectors,
) -> Result<(CMatrix, usize)> {
    let n = proj.dim();
    let m = n - 1;
    let h_block = complement_block(h0, proj);
    let w_block = complement_block(pert, proj);
    let eig = SymmetricEigen::try_new((&h_block + h_block.adjoint()) * C64::new(0.5, 0.0), f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigensolver("free Hamiltonian eigensolve failed".into()))?;
    let q = &eig.eigenvectors;
    let inv_sqrt_diag = eig.eigenvalues.map(|l| (C64::new(l, 0.0) - z).sqrt().inv());
    let b_inv_sqrt = q * CMatrix::from_diagonal(&inv_sqrt_diag) * q.adjoint();
    let k = &b_inv_sqrt * w_block * &b_inv_sqrt;
    let rho = operator_norm(&k);
    if !(rho < 1.0) {
        return Err(Error::NeumannDivergence { norm: rho });
    }
    let mut term = CMatrix::identity(m, m);
    let mut acc = term.clone();
    let mut terms = 1;
    while terms < MAX_NEUMANN_TERMS {
        let size = term.norm();
        if size * rho / (1.0 - rho) <= 1e-17 * acc.norm() {
            break;
        }
        term = -(&k * term);
        acc += &term;
        terms += 1;
    }
    let block = &b_inv_sqrt * acc * &b_inv_sqrt;
    let rotated = if proj.is_canonical() {
        None
    } else {
        Some(proj.vacuum_frame())
    };
    let mut out = CMatrix::zeros(n, n);
    out.view_mut((1, 1), (m, m)).copy_from(&block);
    Ok((
        match rotated {
            Some(f) => &f * out * f.adjoint(),
            None => out,
        },
        terms,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeumannCheck {
    /// Largest `‖R_series(z) − R_direct(z)‖` over `z = 0` and the circle points.
    pub deviation: f64,
    pub max_terms: usize,
    /// `‖R(z)‖` at the sampled `z` on `|z| = 1/2`.
    pub resolvent_norms: Vec<f64>,
    /// `2 / (1 − 8|τ| Σ (j+1)|τ|^{(j-1)/4})`; `None` where that is not positive.
    pub bound: Option<f64>,
    /// Every sampled norm is within the bound (trivially true when the bound
    /// is vacuous).
    pub bound_satisfied: bool,
}

/// Compare the expansion with the direct solve at `z = 0` and at
/// `samples` equispaced points of `|z| = 1/2`, and test the sampled
/// resolvent norms against the small-coupling bound.
pub fn neumann_expansion_check(
    g: &CMatrix,
    e: C64,
    h0: &CMatrix,
    pert: &CMatrix,
    proj: &VacuumProjectors,
    tau: C64,
    samples: usize,
) -> Result<NeumannCheck> {
    let circle: Vec<C64> = (0..samples)
        .map(|p| C64::from_polar(0.5, 2.0 * std::f64::consts::PI * p as f64 / samples as f64))
        .collect();
    let mut deviation: f64 = 0.0;
    let mut max_terms = 0;
    let mut resolvent_norms = Vec::with_capacity(samples);
    for (i, z) in std::iter::once(C64::new(0.0, 0.0)).chain(circle.iter().copied()).enumerate() {
        let direct = reduced_resolvent(g, e, z, proj)?;
        let (series, terms) = neumann_resolvent(h0, pert, z, proj)?;
        deviation = deviation.max(operator_norm(&(&series - &direct)));
        max_terms = max_terms.max(terms);
        if i > 0 {
            resolvent_norms.push(operator_norm(&direct));
        }
    }
    let bound = resolvent_bound(tau.norm());
    let bound_satisfied = bound.is_none_or(|b| resolvent_norms.iter().all(|&r| r <= b));
    Ok(NeumannCheck {
        deviation,
        max_terms,
        resolvent_norms,
        bound,
        bound_satisfied,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{build_g, BlockDiagonalizer, EngineConfig};
    use crate::models::build_spin_model;

    fn at_step(tau: f64, target: StepIndex) -> (CMatrix, C64, CMatrix, CMatrix, VacuumProjectors) {
        let spec = build_spin_model(2, 4, 6);
        let mut engine = BlockDiagonalizer::new(&spec, &EngineConfig::with_tau(C64::new(tau, 0.0))).unwrap();
        while engine.next_step() != Some(target) {
            engine.step().unwrap();
        }
        let space = engine.space();
        let (g, e) = build_g(engine.table(), target, space, 1e-10).unwrap();
        let pert = neumann_perturbation(engine.table(), target, space);
        let h0 = space.free_hamiltonian(target.interval()).matrix;
        (g, e, h0, pert, space.vacuum_projectors(target.interval()))
    }

    #[test]
    fn zero_coupling_has_one_term() {
        let (g, e, h0, pert, proj) = at_step(0.0, StepIndex::new(2, 1));
        assert_eq!(pert.norm(), 0.0);
        let (r, terms) = neumann_resolvent(&h0, &pert, C64::new(0.0, 0.0), &proj).unwrap();
        assert_eq!(terms, 1);
        let direct = reduced_resolvent(&g, e, C64::new(0.0, 0.0), &proj).unwrap();
        assert!((r - direct).norm() < 1e-14);
    }

    #[test]
    fn perturbation_matches_g_minus_free_part() {
        let (g, e, h0, pert, proj) = at_step(0.05, StepIndex::new(2, 1));
        let n = g.nrows();
        let shifted = &g - CMatrix::identity(n, n) * e - &h0;
        assert!((complement_block(&shifted, &proj) - complement_block(&pert, &proj)).norm() < 1e-14);
    }

    #[test]
    fn expansion_matches_direct_solve() {
        for step in [StepIndex::new(2, 1), StepIndex::new(2, 2), StepIndex::new(3, 1)] {
            let (g, e, h0, pert, proj) = at_step(0.05, step);
            let check = neumann_expansion_check(&g, e, &h0, &pert, &proj, C64::new(0.05, 0.0), 8).unwrap();
            assert!(check.deviation < 1e-10, "{step}: {}", check.deviation);
            assert_eq!(check.resolvent_norms.len(), 8);
            assert!(check.bound.is_none());
        }
    }

    #[test]
    fn bound_holds_at_small_coupling() {
        let (g, e, h0, pert, proj) = at_step(0.01, StepIndex::new(2, 1));
        let check = neumann_expansion_check(&g, e, &h0, &pert, &proj, C64::new(0.01, 0.0), 8).unwrap();
        assert!(check.bound.is_some());
        assert!(check.bound_satisfied, "{:?}", check);
    }
}
