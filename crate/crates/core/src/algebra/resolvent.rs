use super::{CMatrix, CVector, C64, ONE, ZERO};
use crate::error::{Error, Result};

/// Reciprocal condition number below which a restricted block counts as singular.
pub const SINGULAR_RCOND: f64 = 1e-10;

/// Rank-one vacuum projector `P⁻ = |Ω_I><Ω_I|` and its complement `P⁺`.
#[derive(Clone, Debug)]
pub struct VacuumProjectors {
    pub vacuum: CVector,
    pub p_minus: CMatrix,
    pub p_plus: CMatrix,
}

impl VacuumProjectors {
    pub fn from_vacuum(vacuum: CVector) -> Self {
        let n = vacuum.len();
        let p_minus = &vacuum * vacuum.adjoint();
        let p_plus = CMatrix::identity(n, n) - &p_minus;
        VacuumProjectors {
            vacuum,
            p_minus,
            p_plus,
        }
    }

    pub fn dim(&self) -> usize {
        self.vacuum.len()
    }

    /// The vacuum is the first basis vector.
    pub fn is_canonical(&self) -> bool {
        self.vacuum[0] == ONE && self.vacuum.iter().skip(1).all(|z| *z == ZERO)
    }

    /// `P⁺ m P⁺ + P⁻ m P⁻`
    pub fn diagonal_part(&self, m: &CMatrix) -> CMatrix {
        if self.is_canonical() {
            let mut out = m.clone();
            for i in 1..m.nrows() {
                out[(i, 0)] = ZERO;
                out[(0, i)] = ZERO;
            }
            return out;
        }
        &self.p_plus * m * &self.p_plus + &self.p_minus * m * &self.p_minus
    }

    /// `P⁺ m P⁻ + P⁻ m P⁺`
    pub fn off_diagonal_part(&self, m: &CMatrix) -> CMatrix {
        m - self.diagonal_part(m)
    }

    /// `max(‖P⁺ m Ω‖, ‖Ω† m P⁺‖)`; zero iff `m` is block-diagonal.
    pub fn off_diagonal_residual(&self, m: &CMatrix) -> f64 {
        let col = m * &self.vacuum;
        let row = m.adjoint() * &self.vacuum;
        let ev = self.vacuum.dotc(&col);
        let col_res = (&col - &self.vacuum * ev).norm();
        let row_res = (&row - &self.vacuum * ev.conj()).norm();
        col_res.max(row_res)
    }

    /// Unitary whose first column is the vacuum.
    pub(crate) fn vacuum_frame(&self) -> CMatrix {
        let n = self.dim();
        let w = &self.vacuum;
        let phase = if w[0].norm() > 0.0 { w[0] / w[0].norm() } else { ONE };
        let mut u = w.clone();
        u[0] += phase;
        let uu = u.norm_squared();
        let h = CMatrix::identity(n, n) - (&u * u.adjoint()) * C64::new(2.0 / uu, 0.0);
        let mut q = h;
        let scale = -phase;
        for i in 0..n {
            q[(i, 0)] *= scale;
        }
        q
    }
}

/// `m` restricted to the range of `P⁺`, written in an orthonormal basis of
/// that range.
pub fn complement_block(m: &CMatrix, proj: &VacuumProjectors) -> CMatrix {
    let n = proj.dim();
    let rotated = if proj.is_canonical() {
        m.clone()
    } else {
        let q = proj.vacuum_frame();
        q.adjoint() * m * q
    };
    rotated.view((1, 1), (n - 1, n - 1)).into_owned()
}

/// Inverse of `P⁺ (G - E - z) P⁺` on the range of `P⁺`, extended by zero on
/// the vacuum.
pub fn reduced_resolvent(g: &CMatrix, e: C64, z: C64, proj: &VacuumProjectors) -> Result<CMatrix> {
    let n = proj.dim();
    if g.nrows() != n || g.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: g.nrows(),
        });
    }
    let shift = e + z;
    let frame = (!proj.is_canonical()).then(|| proj.vacuum_frame());
    let rotated = match &frame {
        Some(q) => q.adjoint() * g * q,
        None => g.clone(),
    };
    let m = n - 1;
    let mut block = rotated.view((1, 1), (m, m)).into_owned();
    for i in 0..m {
        block[(i, i)] -= shift;
    }
    let sv = block.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let rcond = if smax > 0.0 { smin / smax } else { 0.0 };
    if !(rcond >= SINGULAR_RCOND) {
        return Err(Error::SingularRestriction { rcond });
    }
    let inv = block
        .lu()
        .try_inverse()
        .ok_or(Error::SingularRestriction { rcond })?;
    let mut out = CMatrix::zeros(n, n);
    out.view_mut((1, 1), (m, m)).copy_from(&inv);
    Ok(match frame {
        Some(q) => &q * out * q.adjoint(),
        None => out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{operator_norm, IntervalSupport, LocalSpace};

    fn diag(v: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_iterator(v.len(), v.iter().map(|&x| C64::new(x, 0.0))))
    }

    fn qubit() -> LocalSpace {
        LocalSpace::new(diag(&[0.0, 1.0]), CVector::from_vec(vec![ONE, ZERO])).unwrap()
    }

    #[test]
    fn projector_algebra() {
        let ls = qubit();
        let single = ls.vacuum_projectors(IntervalSupport::site(1));
        assert_eq!(single.p_minus, diag(&[1.0, 0.0]));
        let pair = ls.vacuum_projectors(IntervalSupport::new(1, 1));
        assert_eq!(pair.p_minus, diag(&[1.0, 0.0, 0.0, 0.0]));
        assert!((&pair.p_minus * &pair.p_minus - &pair.p_minus).norm() == 0.0);
        assert!((&pair.p_plus * &pair.p_minus).norm() == 0.0);
        let trace: C64 = pair.p_minus.trace();
        assert_eq!(trace, ONE);
        assert_eq!(pair.p_minus.clone().rank(1e-12), 1);
    }

    #[test]
    fn free_resolvent_singular_values() {
        let ls = qubit();
        let iv = IntervalSupport::new(1, 1);
        let g = ls.free_hamiltonian(iv).matrix;
        let proj = ls.vacuum_projectors(iv);
        let r = reduced_resolvent(&g, ZERO, ZERO, &proj).unwrap();
        let mut sv: Vec<f64> = r.singular_values().iter().copied().filter(|s| *s > 1e-14).collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_eq!(sv.len(), 3);
        assert!((sv[0] - 1.0).abs() < 1e-14 && (sv[1] - 1.0).abs() < 1e-14 && (sv[2] - 0.5).abs() < 1e-14);
        let restricted = &proj.p_plus * &g * &proj.p_plus;
        assert!((&r * restricted - &proj.p_plus).norm() < 1e-13);
    }

    #[test]
    fn free_resolvent_bounded_on_half_disk() {
        let ls = qubit();
        let iv = IntervalSupport::new(1, 2);
        let g = ls.free_hamiltonian(iv).matrix;
        let proj = ls.vacuum_projectors(iv);
        for p in 0..8 {
            let theta = p as f64 * std::f64::consts::PI / 4.0;
            let z = C64::from_polar(0.5, theta);
            let r = reduced_resolvent(&g, ZERO, z, &proj).unwrap();
            assert!(operator_norm(&r) <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn singular_restriction_is_reported() {
        let ls = qubit();
        let iv = IntervalSupport::new(1, 1);
        let g = ls.free_hamiltonian(iv).matrix;
        let proj = ls.vacuum_projectors(iv);
        let err = reduced_resolvent(&g, ZERO, C64::new(1.0, 0.0), &proj).unwrap_err();
        assert!(matches!(err, Error::SingularRestriction { .. }));
    }

    #[test]
    fn general_vacuum_matches_canonical_frame() {
        let theta: f64 = 0.7;
        let (c, s) = (theta.cos(), theta.sin());
        let rot = CMatrix::from_row_slice(2, 2, &[C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(0.0, s), C64::new(0.0, c)]);
        let g = diag(&[0.0, 1.3]);
        let proj = VacuumProjectors::from_vacuum(CVector::from_vec(vec![ONE, ZERO]));
        let r = reduced_resolvent(&g, ZERO, ZERO, &proj).unwrap();
        let g_rot = &rot * &g * rot.adjoint();
        let proj_rot = VacuumProjectors::from_vacuum(rot.column(0).into_owned());
        let frame = proj_rot.vacuum_frame();
        assert!((frame.adjoint() * &frame - CMatrix::identity(2, 2)).norm() < 1e-14);
        assert!((frame.column(0) - rot.column(0)).norm() < 1e-14);
        let r_rot = reduced_resolvent(&g_rot, ZERO, ZERO, &proj_rot).unwrap();
        assert!((r_rot - &rot * r * rot.adjoint()).norm() < 1e-13);
    }
}
