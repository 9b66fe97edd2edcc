use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{CMatrix, C64};
use crate::error::{Error, Result};

/// A run of consecutive sites `{left, ..., left + edges}` (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntervalSupport {
    pub left: usize,
    pub edges: usize,
}

impl IntervalSupport {
    pub const fn new(left: usize, edges: usize) -> Self {
        IntervalSupport { left, edges }
    }

    /// Single-site support.
    pub const fn site(i: usize) -> Self {
        IntervalSupport { left: i, edges: 0 }
    }

    /// The whole chain `{1, ..., n}`.
    pub const fn chain(n: usize) -> Self {
        IntervalSupport {
            left: 1,
            edges: n - 1,
        }
    }

    pub const fn right(&self) -> usize {
        self.left + self.edges
    }

    pub const fn n_sites(&self) -> usize {
        self.edges + 1
    }

    /// Hilbert-space dimension `d^(edges+1)`.
    pub fn dim(&self, d: usize) -> usize {
        d.pow(self.n_sites() as u32)
    }

    pub fn contains_site(&self, i: usize) -> bool {
        self.left <= i && i <= self.right()
    }

    /// Non-strict inclusion `other ⊆ self`.
    pub fn contains(&self, other: &IntervalSupport) -> bool {
        self.left <= other.left && other.right() <= self.right()
    }

    pub fn strictly_contains(&self, other: &IntervalSupport) -> bool {
        self.contains(other) && self != other
    }

    pub fn intersects(&self, other: &IntervalSupport) -> bool {
        self.left <= other.right() && other.left <= self.right()
    }

    /// Smallest interval containing both.
    pub fn hull(&self, other: &IntervalSupport) -> IntervalSupport {
        let left = self.left.min(other.left);
        let right = self.right().max(other.right());
        IntervalSupport::new(left, right - left)
    }

    /// Intersecting, but neither contains the other.
    pub fn overlaps_partially(&self, other: &IntervalSupport) -> bool {
        self.intersects(other) && !self.contains(other) && !other.contains(self)
    }

    pub fn fits(&self, n_sites: usize) -> bool {
        self.left >= 1 && self.right() <= n_sites
    }

    pub fn check_fits(&self, n_sites: usize) -> Result<()> {
        if self.fits(n_sites) {
            Ok(())
        } else {
            Err(Error::InvalidInterval {
                interval: *self,
                n_sites,
            })
        }
    }

    /// Same interval moved by `shift` sites.
    pub fn shifted(&self, shift: isize) -> IntervalSupport {
        IntervalSupport::new((self.left as isize + shift) as usize, self.edges)
    }
}

impl fmt::Display for IntervalSupport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "I[{}..={}]", self.left, self.right())
    }
}

/// A dense operator acting on the tensor factor of its support.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalOperator {
    pub support: IntervalSupport,
    pub matrix: CMatrix,
}

impl LocalOperator {
    pub fn new(support: IntervalSupport, matrix: CMatrix, d: usize) -> Result<Self> {
        let expected = support.dim(d);
        if matrix.nrows() != expected || matrix.ncols() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(LocalOperator { support, matrix })
    }

    pub fn zeros(support: IntervalSupport, d: usize) -> Self {
        let n = support.dim(d);
        LocalOperator {
            support,
            matrix: CMatrix::zeros(n, n),
        }
    }

    pub fn identity(support: IntervalSupport, d: usize) -> Self {
        let n = support.dim(d);
        LocalOperator {
            support,
            matrix: CMatrix::identity(n, n),
        }
    }
}

/// Kronecker product `a ⊗ b` in the lexicographic basis (left factor slowest).
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// `1_{dl} ⊗ m ⊗ 1_{dr}` without forming the identity factors.
pub fn pad_identity(m: &CMatrix, dl: usize, dr: usize) -> CMatrix {
    let dm = m.nrows();
    let n = dl * dm * dr;
    let mut out = CMatrix::zeros(n, n);
    for l in 0..dl {
        for b in 0..dm {
            for a in 0..dm {
                let v = m[(a, b)];
                if v == C64::new(0.0, 0.0) {
                    continue;
                }
                for r in 0..dr {
                    out[((l * dm + a) * dr + r, (l * dm + b) * dr + r)] = v;
                }
            }
        }
    }
    out
}

/// Embed `op` into the larger support `target`, acting as the identity on
/// the extra sites.
pub fn tensor_embed(op: &LocalOperator, target: IntervalSupport, d: usize) -> Result<LocalOperator> {
    if !target.contains(&op.support) {
        return Err(Error::SupportNotContained {
            inner: op.support,
            outer: target,
        });
    }
    let (dl, dr) = padding_dims(op.support, target, d);
    Ok(LocalOperator {
        support: target,
        matrix: pad_identity(&op.matrix, dl, dr),
    })
}

/// Dimensions of the identity factors left and right of `inner` within `outer`.
pub(crate) fn padding_dims(inner: IntervalSupport, outer: IntervalSupport, d: usize) -> (usize, usize) {
    let dl = d.pow((inner.left - outer.left) as u32);
    let dr = d.pow((outer.right() - inner.right()) as u32);
    (dl, dr)
}

/// Placement of a small operator inside a larger tensor-product space.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Placement {
    pub dl: usize,
    pub da: usize,
    pub dr: usize,
}

impl Placement {
    pub fn new(inner: IntervalSupport, outer: IntervalSupport, d: usize) -> Self {
        let (dl, dr) = padding_dims(inner, outer, d);
        Placement {
            dl,
            da: inner.dim(d),
            dr,
        }
    }

    pub fn dim(&self) -> usize {
        self.dl * self.da * self.dr
    }

    /// `(1 ⊗ a ⊗ 1) x`
    pub fn mul_left(&self, a: &CMatrix, x: &CMatrix) -> CMatrix {
        let n = self.dim();
        debug_assert_eq!(x.nrows(), n);
        let (da, dr) = (self.da, self.dr);
        let ncols = x.ncols();
        let mut out = CMatrix::zeros(n, ncols);
        let xs = x.as_slice();
        let os = out.as_mut_slice();
        let a_s = a.as_slice();
        for c in 0..ncols {
            let xc = &xs[c * n..(c + 1) * n];
            let oc = &mut os[c * n..(c + 1) * n];
            for l in 0..self.dl {
                for beta in 0..da {
                    let base_in = (l * da + beta) * dr;
                    for alpha in 0..da {
                        let coef = a_s[beta * da + alpha];
                        if coef.re == 0.0 && coef.im == 0.0 {
                            continue;
                        }
                        let base_out = (l * da + alpha) * dr;
                        for r in 0..dr {
                            oc[base_out + r] += coef * xc[base_in + r];
                        }
                    }
                }
            }
        }
        out
    }

    /// `x (1 ⊗ a ⊗ 1)`
    pub fn mul_right(&self, x: &CMatrix, a: &CMatrix) -> CMatrix {
        let n = self.dim();
        debug_assert_eq!(x.ncols(), n);
        let (da, dr) = (self.da, self.dr);
        let nrows = x.nrows();
        let mut out = CMatrix::zeros(nrows, n);
        let xs = x.as_slice();
        let os = out.as_mut_slice();
        let a_s = a.as_slice();
        for l in 0..self.dl {
            for r in 0..dr {
                for alpha in 0..da {
                    let col_out = (l * da + alpha) * dr + r;
                    for gamma in 0..da {
                        let coef = a_s[alpha * da + gamma];
                        if coef.re == 0.0 && coef.im == 0.0 {
                            continue;
                        }
                        let col_in = (l * da + gamma) * dr + r;
                        let src = &xs[col_in * nrows..(col_in + 1) * nrows];
                        let dst = &mut os[col_out * nrows..(col_out + 1) * nrows];
                        for (o, v) in dst.iter_mut().zip(src) {
                            *o += *v * coef;
                        }
                    }
                }
            }
        }
        out
    }

    /// `[1 ⊗ a ⊗ 1, x]`
    pub fn commutator(&self, a: &CMatrix, x: &CMatrix) -> CMatrix {
        self.mul_left(a, x) - self.mul_right(x, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn interval_relations() {
        let a = IntervalSupport::new(1, 1);
        let b = IntervalSupport::new(2, 1);
        let big = IntervalSupport::new(1, 2);
        assert!(a.overlaps_partially(&b));
        assert_eq!(a.hull(&b), big);
        assert!(big.strictly_contains(&a));
        assert!(!a.intersects(&IntervalSupport::new(3, 1)));
        assert!(big.contains(&big) && !big.strictly_contains(&big));
        assert!(!IntervalSupport::new(3, 2).fits(4));
    }

    #[test]
    fn identity_embeds_to_identity() {
        let id = LocalOperator::identity(IntervalSupport::new(1, 1), 2);
        let e = tensor_embed(&id, IntervalSupport::new(1, 2), 2).unwrap();
        assert_eq!(e.matrix, CMatrix::identity(8, 8));
    }

    #[test]
    fn onsite_term_embeds_as_kronecker() {
        let h = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.0), c(1.0)]));
        let op = LocalOperator::new(IntervalSupport::site(2), h, 2).unwrap();
        let e = tensor_embed(&op, IntervalSupport::new(1, 1), 2).unwrap();
        let expected = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(0.0),
            c(1.0),
            c(0.0),
            c(1.0),
        ]));
        assert_eq!(e.matrix, expected);
    }

    #[test]
    fn embed_rejects_foreign_support() {
        let op = LocalOperator::zeros(IntervalSupport::new(2, 1), 2);
        let err = tensor_embed(&op, IntervalSupport::new(1, 1), 2).unwrap_err();
        assert!(matches!(err, Error::SupportNotContained { .. }));
    }

    #[test]
    fn placement_products_match_kron() {
        let d = 2;
        let inner = IntervalSupport::new(2, 1);
        let outer = IntervalSupport::new(1, 3);
        let a = CMatrix::from_fn(4, 4, |i, j| C64::new((i + 2 * j) as f64, i as f64 - j as f64));
        let x = CMatrix::from_fn(16, 16, |i, j| C64::new(((i * 3 + j) % 7) as f64, ((i + j) % 3) as f64));
        let p = Placement::new(inner, outer, d);
        let big = pad_identity(&a, 2, 2);
        assert!((p.mul_left(&a, &x) - &big * &x).norm() < 1e-12);
        assert!((p.mul_right(&x, &a) - &x * &big).norm() < 1e-12);
    }
}
