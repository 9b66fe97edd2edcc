//! Dense complex operator algebra on interval subspaces of the chain.
//!
//! Every operator lives on `H_q ⊗ ... ⊗ H_{q+k}` for some interval and is
//! stored as a dense matrix in the lexicographic product basis, leftmost
//! site slowest.

mod expm;
mod interval;
mod resolvent;

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub use expm::matrix_exponential;
pub use interval::{kron, pad_identity, tensor_embed, IntervalSupport, LocalOperator};
pub(crate) use interval::{padding_dims, Placement};
pub use resolvent::{complement_block, reduced_resolvent, VacuumProjectors, SINGULAR_RCOND};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Largest singular value.
pub fn operator_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
        return 0.0;
    }
    m.clone().singular_values().max()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn hermitian_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).norm()
}

/// Whether every off-diagonal entry is exactly zero.
pub(crate) fn is_diagonal(m: &CMatrix) -> bool {
    m.iter()
        .enumerate()
        .all(|(idx, z)| idx % (m.nrows() + 1) == 0 || (z.re == 0.0 && z.im == 0.0))
}

/// `<x, m x>` for a unit vector `x`.
pub fn expectation(m: &CMatrix, x: &CVector) -> C64 {
    x.dotc(&(m * x))
}

/// All eigenvalues, sorted by real part then imaginary part.
///
/// Hermitian input uses the symmetric solver; anything else goes through a
/// complex Schur decomposition, which does not assume diagonalizability.
pub fn eigenvalues(m: &CMatrix, hermitian: bool) -> Result<Vec<C64>> {
    let mut out: Vec<C64> = if hermitian {
        let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::try_new(herm, f64::EPSILON, 0)
            .ok_or_else(|| Error::Eigensolver("symmetric eigensolver did not converge".into()))?
            .eigenvalues
            .iter()
            .map(|&x| C64::new(x, 0.0))
            .collect()
    } else {
        nalgebra::Schur::try_new(m.clone(), f64::EPSILON, 0)
            .and_then(|s| s.eigenvalues())
            .ok_or_else(|| Error::Eigensolver("Schur decomposition did not converge".into()))?
            .iter()
            .copied()
            .collect()
    };
    out.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(out)
}

/// Per-length data shared by every interval of that length.
#[derive(Debug)]
struct LengthData {
    free: CMatrix,
    vacuum: CVector,
    /// `(H0 + 1)^{-1/2}`, stored as a diagonal when `H0` is diagonal.
    inv_sqrt: Weight,
}

#[derive(Debug)]
enum Weight {
    Diagonal(Vec<f64>),
    Dense(CMatrix),
}

impl Weight {
    fn sandwich(&self, v: &CMatrix) -> CMatrix {
        match self {
            Weight::Diagonal(w) => CMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * (w[i] * w[j])),
            Weight::Dense(w) => w * v * w,
        }
    }
}

/// The single-site Hilbert space: on-site Hamiltonian `H` with vacuum `Ω`,
/// plus cached interval-level objects built from it.
#[derive(Debug)]
pub struct LocalSpace {
    d: usize,
    h_local: CMatrix,
    omega: CVector,
    h_diagonal: bool,
    cache: RwLock<BTreeMap<usize, Arc<LengthData>>>,
}

impl Clone for LocalSpace {
    fn clone(&self) -> Self {
        LocalSpace::new(self.h_local.clone(), self.omega.clone()).expect("validated on construction")
    }
}

impl LocalSpace {
    pub fn new(h_local: CMatrix, omega: CVector) -> Result<Self> {
        let d = h_local.nrows();
        if d < 2 || h_local.ncols() != d {
            return Err(Error::InvalidSpec(format!(
                "on-site Hamiltonian must be square with d >= 2, got {}x{}",
                h_local.nrows(),
                h_local.ncols()
            )));
        }
        if omega.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: omega.len(),
            });
        }
        let h_diagonal = is_diagonal(&h_local);
        Ok(LocalSpace {
            d,
            h_local,
            omega,
            h_diagonal,
            cache: RwLock::new(BTreeMap::new()),
        })
    }

    pub fn local_dim(&self) -> usize {
        self.d
    }

    pub fn h_local(&self) -> &CMatrix {
        &self.h_local
    }

    pub fn omega(&self) -> &CVector {
        &self.omega
    }

    fn length_data(&self, edges: usize) -> Arc<LengthData> {
        if let Some(data) = self.cache.read().expect("cache lock").get(&edges) {
            return Arc::clone(data);
        }
        let data = Arc::new(self.build_length_data(edges));
        self.cache
            .write()
            .expect("cache lock")
            .entry(edges)
            .or_insert(data)
            .clone()
    }

    fn build_length_data(&self, edges: usize) -> LengthData {
        let sites = edges + 1;
        let n = self.d.pow(sites as u32);
        let mut free = CMatrix::zeros(n, n);
        for i in 0..sites {
            let dl = self.d.pow(i as u32);
            let dr = self.d.pow((sites - 1 - i) as u32);
            free += pad_identity(&self.h_local, dl, dr);
        }
        let mut vacuum = CVector::from_element(1, ONE);
        for _ in 0..sites {
            vacuum = vacuum.kronecker(&self.omega);
        }
        let inv_sqrt = if self.h_diagonal {
            Weight::Diagonal((0..n).map(|i| 1.0 / (free[(i, i)].re + 1.0).sqrt()).collect())
        } else {
            let shifted = &free + CMatrix::identity(n, n);
            let eig = SymmetricEigen::new(shifted);
            let q = &eig.eigenvectors;
            let scale = CMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::new(1.0 / l.sqrt(), 0.0)));
            Weight::Dense(q * scale * q.adjoint())
        };
        LengthData { free, vacuum, inv_sqrt }
    }

    /// `H0_I = Σ_{i∈I} H_i` on the interval space.
    pub fn free_hamiltonian(&self, interval: IntervalSupport) -> LocalOperator {
        LocalOperator {
            support: interval,
            matrix: self.length_data(interval.edges).free.clone(),
        }
    }

    /// `Ω ⊗ ... ⊗ Ω` over the interval.
    pub fn vacuum_vector(&self, interval: IntervalSupport) -> CVector {
        self.length_data(interval.edges).vacuum.clone()
    }

    pub fn vacuum_projectors(&self, interval: IntervalSupport) -> VacuumProjectors {
        VacuumProjectors::from_vacuum(self.vacuum_vector(interval))
    }

    /// `(H0_I + 1)^{-1/2} V (H0_I + 1)^{-1/2}`
    pub fn weighted_sandwich(&self, v: &LocalOperator) -> CMatrix {
        self.length_data(v.support.edges).inv_sqrt.sandwich(&v.matrix)
    }

    /// `‖(H0_I + 1)^{-1/2} V (H0_I + 1)^{-1/2}‖`
    pub fn weighted_norm(&self, v: &LocalOperator) -> f64 {
        operator_norm(&self.weighted_sandwich(v))
    }

    /// Frobenius version of the weighted norm; an upper bound for it.
    pub fn weighted_frobenius(&self, v: &LocalOperator) -> f64 {
        self.weighted_sandwich(v).norm()
    }

    /// Vacuum expectation `<Ω_I, V Ω_I>`.
    pub fn vacuum_expectation(&self, v: &LocalOperator) -> C64 {
        let data = self.length_data(v.support.edges);
        expectation(&v.matrix, &data.vacuum)
    }
}
