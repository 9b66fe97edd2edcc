use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ChainSpec, ModelKind, SeedPotential};
use crate::algebra::{kron, CMatrix, CVector, IntervalSupport, LocalOperator, LocalSpace, C64, ONE, ZERO};
use crate::error::{Error, Result};

const DEGENERACY_TOL: f64 = 1e-10;

/// Target weighted norm of every seed potential.
pub const SEED_WEIGHTED_NORM: f64 = 0.5;

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Eigenpairs of a Hermitian matrix, ascending.
fn sorted_eigen(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(h.nrows(), h.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Rotate `v` so that its largest-magnitude component is real and positive.
fn fix_phase(v: &mut CVector) {
    let pivot = v
        .iter()
        .enumerate()
        .fold((0, 0.0), |best, (i, z)| if z.norm() > best.1 { (i, z.norm()) } else { best })
        .0;
    let z = v[pivot];
    if z.norm() > 0.0 {
        let phase = z.conj() / z.norm();
        *v *= phase;
    }
}

fn ensure_hermitian(h: &CMatrix) -> Result<()> {
    if h.nrows() != h.ncols() || h.nrows() < 2 {
        return Err(Error::InvalidSpec(format!("on-site matrix must be square with d >= 2, got {}x{}", h.nrows(), h.ncols())));
    }
    if crate::algebra::hermitian_defect(h) > 1e-12 * h.norm().max(1.0) {
        return Err(Error::InvalidSpec("on-site matrix is not Hermitian".into()));
    }
    Ok(())
}

/// Shift the ground energy to zero and scale the gap to one.
///
/// Returns the normalized matrix and its ground vector.
pub fn normalize_onsite(h_raw: &CMatrix) -> Result<(CMatrix, CVector)> {
    ensure_hermitian(h_raw)?;
    let (values, vectors) = sorted_eigen(h_raw);
    let gap = values[1] - values[0];
    if !(gap >= DEGENERACY_TOL) {
        return Err(Error::DegenerateGround { gap });
    }
    let d = h_raw.nrows();
    let mut omega = vectors.column(0).into_owned();
    fix_phase(&mut omega);
    let shifted = (h_raw - CMatrix::identity(d, d) * real(values[0])) * real(1.0 / gap);
    let complement = CMatrix::identity(d, d) - &omega * omega.adjoint();
    let h = &complement * shifted * &complement;
    let h = (&h + h.adjoint()) * real(0.5);
    Ok((h, omega))
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let a = CMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    (&a + a.adjoint()) * real(0.5)
}

fn rescale_to_seed_norm(space: &LocalSpace, edges: usize, matrix: CMatrix) -> Result<CMatrix> {
    let op = LocalOperator::new(IntervalSupport::new(1, edges), matrix, space.local_dim())?;
    let w = space.weighted_norm(&op);
    if w == 0.0 {
        return Err(Error::InvalidSpec(format!("seed with {edges} edges vanishes")));
    }
    Ok(op.matrix * real(SEED_WEIGHTED_NORM / w))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpinCoupling {
    /// Random Hermitian nearest-neighbor coupling from the seeded generator.
    Random,
    /// `X ⊗ X` with `X = |0><1| + |1><0|`.
    Xx,
}

/// Generic gapped spin chain with on-site `diag(0, 1, ..., 1)`.
#[derive(Clone, Copy, Debug)]
pub struct SpinModel {
    pub d: usize,
    pub n_sites: usize,
    pub rng_seed: u64,
    pub kbar: usize,
    pub coupling: SpinCoupling,
}

impl SpinModel {
    pub fn new(d: usize, n_sites: usize, rng_seed: u64) -> Self {
        SpinModel {
            d,
            n_sites,
            rng_seed,
            kbar: 1,
            coupling: SpinCoupling::Random,
        }
    }

    pub fn build(&self) -> Result<ChainSpec> {
        let d = self.d;
        if d < 2 {
            return Err(Error::InvalidSpec(format!("local dimension must be at least 2, got {d}")));
        }
        if !(1..=2).contains(&self.kbar) {
            return Err(Error::InvalidSpec(format!("kbar must be 1 or 2, got {}", self.kbar)));
        }
        let raw = CMatrix::from_diagonal(&CVector::from_fn(d, |i, _| if i == 0 { ZERO } else { ONE }));
        let (h_local, omega) = normalize_onsite(&raw)?;
        let space = LocalSpace::new(h_local.clone(), omega.clone())?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);

        let nn = match self.coupling {
            SpinCoupling::Random => random_hermitian(&mut rng, d * d),
            SpinCoupling::Xx => {
                let mut x = CMatrix::zeros(d, d);
                x[(0, 1)] = ONE;
                x[(1, 0)] = ONE;
                kron(&x, &x)
            }
        };
        let mut seeds = vec![SeedPotential {
            edges: 1,
            matrix: rescale_to_seed_norm(&space, 1, nn)?,
        }];
        if self.kbar == 2 {
            let three = random_hermitian(&mut rng, d * d * d);
            seeds.push(SeedPotential {
                edges: 2,
                matrix: rescale_to_seed_norm(&space, 2, three)?,
            });
        }
        let spec = ChainSpec {
            model: ModelKind::Spin,
            n_sites: self.n_sites,
            local_dim: d,
            rng_seed: Some(self.rng_seed),
            d_trunc: None,
            kbar: self.kbar,
            translation_invariant: true,
            h_local,
            omega,
            seeds,
            truncation_discrepancy: None,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Spin chain with one random nearest-neighbor coupling.
///
/// Panics if `d < 2` or `n < 2`.
pub fn build_spin_model(d: usize, n: usize, rng_seed: u64) -> ChainSpec {
    SpinModel::new(d, n, rng_seed).build().expect("spin model parameters out of range")
}

/// Position operator `(a + a†)/√2` on the first `levels` oscillator states.
pub fn oscillator_position(levels: usize) -> CMatrix {
    let mut x = CMatrix::zeros(levels, levels);
    for n in 0..levels.saturating_sub(1) {
        let v = real(((n + 1) as f64 / 2.0).sqrt());
        x[(n, n + 1)] = v;
        x[(n + 1, n)] = v;
    }
    x
}

fn oscillator_momentum(levels: usize) -> CMatrix {
    let mut p = CMatrix::zeros(levels, levels);
    for n in 0..levels.saturating_sub(1) {
        let v = ((n + 1) as f64 / 2.0).sqrt();
        // p = i (a† - a) / √2
        p[(n + 1, n)] = C64::new(0.0, v);
        p[(n, n + 1)] = C64::new(0.0, -v);
    }
    p
}

/// `p² + x² + x⁴` built from the truncated ladder operators.
pub(crate) fn anharmonic_onsite(levels: usize) -> CMatrix {
    let x = oscillator_position(levels);
    let p = oscillator_momentum(levels);
    let x2 = &x * &x;
    &p * &p + &x2 + &x2 * &x2
}

/// Truncated φ⁴ crystal: anharmonic oscillators coupled by `x ⊗ x`.
pub fn build_anharmonic_model(d_trunc: usize, n: usize) -> Result<ChainSpec> {
    if d_trunc < 3 {
        return Err(Error::InvalidSpec(format!("d_trunc must be at least 3, got {d_trunc}")));
    }
    let h_raw = anharmonic_onsite(d_trunc);
    ensure_hermitian(&h_raw)?;
    let (values, q) = sorted_eigen(&h_raw);
    let gap = values[1] - values[0];
    if !(gap >= DEGENERACY_TOL) {
        return Err(Error::DegenerateGround { gap });
    }
    // Work in the eigenbasis so that the vacuum is the first basis vector.
    let h_local = CMatrix::from_diagonal(&CVector::from_iterator(
        d_trunc,
        values.iter().map(|l| real((l - values[0]) / gap)),
    ));
    let omega = CVector::from_fn(d_trunc, |i, _| if i == 0 { ONE } else { ZERO });
    let x = oscillator_position(d_trunc);
    let x_rot = q.adjoint() * x * &q;
    let x_rot = (&x_rot + x_rot.adjoint()) * real(0.5);
    let space = LocalSpace::new(h_local.clone(), omega.clone())?;
    let w = rescale_to_seed_norm(&space, 1, kron(&x_rot, &x_rot))?;

    let spec = ChainSpec {
        model: ModelKind::Anharmonic,
        n_sites: n,
        local_dim: d_trunc,
        rng_seed: None,
        d_trunc: Some(d_trunc),
        kbar: 1,
        translation_invariant: true,
        h_local,
        omega,
        seeds: vec![SeedPotential { edges: 1, matrix: w }],
        truncation_discrepancy: Some(quartic_truncation_discrepancy(d_trunc)),
    };
    spec.validate()?;
    Ok(spec)
}

/// `‖(x_d)^4 − P_d x^4 P_d‖_F`, with the exact block obtained from two
/// extra levels (`x^4` connects levels at most two apart on each side).
fn quartic_truncation_discrepancy(d: usize) -> f64 {
    let x = oscillator_position(d);
    let x2 = &x * &x;
    let truncated = &x2 * &x2;
    let big = oscillator_position(d + 2);
    let big2 = &big * &big;
    let exact = (&big2 * &big2).view((0, 0), (d, d)).into_owned();
    (truncated - exact).norm()
}
