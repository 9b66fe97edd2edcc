//! Independent checks on engine output: exact diagonalization, gap
//! certificates, direct conjugation, analyticity and per-site energies.

mod analyticity;
mod neumann;
mod suite;
mod thermo;

use serde::{Deserialize, Serialize};

use crate::algebra::{complement_block, eigenvalues, matrix_exponential, operator_norm, CMatrix, VacuumProjectors, C64};
use crate::engine::{BlockDiagonalizer, EngineConfig, RunReport};
use crate::error::{Error, Result};
use crate::models::{check_dim_cap, ChainSpec, FullHamiltonian};

pub use analyticity::{analyticity_report, cauchy_coefficients, cr_residual, AnalyticityReport};
pub use neumann::{neumann_expansion_check, neumann_perturbation, neumann_resolvent, NeumannCheck};
pub use suite::{inputs_digest, run_verification, CheckRecord, VerificationReport};
pub use thermo::{thermo_analysis, thermo_majorant, ThermoPair, ThermoReport};

/// Distance below which two eigenvalues count as colliding when matching.
pub const COLLISION_DISTANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// Sorted by real part, then imaginary part.
    #[serde(with = "complex_list")]
    pub eigenvalues: Vec<C64>,
    pub hermitian: bool,
}

/// All eigenvalues of `K_N`, from the symmetric solver when the matrix is
/// Hermitian and from a complex Schur form otherwise.
pub fn exact_spectrum(k: &FullHamiltonian) -> Result<SpectrumResult> {
    let hermitian = k.is_hermitian();
    Ok(SpectrumResult {
        eigenvalues: eigenvalues(&k.matrix, hermitian)?,
        hermitian,
    })
}

/// The eigenvalue closest to a target and how well it is separated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenMatch {
    pub value: C64,
    pub distance: f64,
    /// Distance from `value` to the nearest other eigenvalue.
    pub isolation: f64,
    /// Another eigenvalue lies within [`COLLISION_DISTANCE`] of the target.
    pub collision: bool,
    /// Number of eigenvalues inside the disk of the given radius around the target.
    pub in_disk: usize,
}

impl SpectrumResult {
    pub fn min_real(&self) -> C64 {
        self.eigenvalues[0]
    }

    pub fn nearest(&self, target: C64, disk_radius: f64) -> EigenMatch {
        let (idx, distance) = self
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(i, l)| (i, (l - target).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty spectrum");
        let value = self.eigenvalues[idx];
        let others = || self.eigenvalues.iter().enumerate().filter(move |(i, _)| *i != idx);
        let isolation = others().map(|(_, l)| (l - value).norm()).fold(f64::INFINITY, f64::min);
        let collision = others().any(|(_, l)| (l - target).norm() < COLLISION_DISTANCE);
        let in_disk = self.eigenvalues.iter().filter(|l| (*l - target).norm() <= disk_radius).count();
        EigenMatch {
            value,
            distance,
            isolation,
            collision,
            in_disk,
        }
    }
}

/// Outcome of the gap certificate on the final Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapCheck {
    /// `min |λ − E_N|` over the spectrum of `K̃_N` on the complement of the
    /// chain vacuum.
    pub margin: f64,
    /// `‖K̃_N Ω − E_N Ω‖`
    pub vacuum_column_residual: f64,
    pub pass: bool,
}

pub const GAP_THRESHOLD: f64 = 0.5;

/// Gap certificate for a finished engine: spectrum of `K̃_N` restricted to
/// the complement of the vacuum, measured from `E_N`.
pub fn check_gap_engine(engine: &BlockDiagonalizer) -> Result<GapCheck> {
    let k_tilde = engine.final_hamiltonian()?;
    let e_n = engine.table().vacuum_energy();
    let n = engine.spec().n_sites;
    let proj = VacuumProjectors::from_vacuum(chain_vacuum(engine.spec(), n));
    let hermitian = engine.table().tau.im == 0.0;
    let block = complement_block(&k_tilde, &proj);
    let margin = eigenvalues(&block, hermitian)?
        .iter()
        .map(|l| (l - e_n).norm())
        .fold(f64::INFINITY, f64::min);
    let vacuum_column_residual = (&k_tilde * &proj.vacuum - &proj.vacuum * e_n).norm();
    Ok(GapCheck {
        margin,
        vacuum_column_residual,
        pass: margin >= GAP_THRESHOLD - 1e-9,
    })
}

/// Re-runs the engine for `spec` and `cfg` (the run is deterministic) and
/// certifies the gap of the final Hamiltonian.
pub fn check_gap(spec: &ChainSpec, cfg: &EngineConfig, report: &RunReport) -> Result<GapCheck> {
    check_dim_cap(spec.local_dim, spec.n_sites, cfg.dim_cap)?;
    let mut engine = BlockDiagonalizer::new(spec, cfg)?;
    engine.run_to_end()?;
    if engine.table().vacuum_energy() != report.e_n {
        return Err(Error::Config("report does not come from this spec and config".into()));
    }
    check_gap_engine(&engine)
}

fn chain_vacuum(spec: &ChainSpec, n: usize) -> crate::algebra::CVector {
    let mut v = crate::algebra::CVector::from_element(1, C64::new(1.0, 0.0));
    for _ in 0..n {
        v = v.kronecker(&spec.omega);
    }
    v
}

/// `‖e^{s} k_before e^{−s} − k_after‖`
pub fn direct_conjugation_check(k_before: &CMatrix, s_embedded: &CMatrix, k_after: &CMatrix) -> Result<f64> {
    if k_before.shape() != s_embedded.shape() || k_before.shape() != k_after.shape() {
        return Err(Error::DimensionMismatch {
            expected: k_before.nrows(),
            found: s_embedded.nrows().max(k_after.nrows()),
        });
    }
    let es = matrix_exponential(s_embedded)?;
    let ems = matrix_exponential(&(-s_embedded))?;
    Ok(operator_norm(&(es * k_before * ems - k_after)))
}

/// `‖u†u − 1‖`
pub fn unitarity_check(u: &CMatrix) -> f64 {
    let n = u.ncols();
    operator_norm(&(u.adjoint() * u - CMatrix::identity(n, n)))
}

pub(crate) mod complex_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::algebra::C64;

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        let raw = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(raw.into_iter().map(|[re, im]| C64::new(re, im)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{pad_identity, padding_dims, IntervalSupport};
    use crate::engine::run_blockdiag;
    use crate::models::{assemble_full_hamiltonian, build_spin_model};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn diagonal_spectrum() {
        let m = CMatrix::from_diagonal(&crate::algebra::CVector::from_vec(vec![c(3.0, 0.0), c(-1.0, 0.0), c(2.0, 0.0)]));
        let k = FullHamiltonian { matrix: m, tau: c(0.0, 0.0) };
        let spec = exact_spectrum(&k).unwrap();
        assert!(spec.hermitian);
        assert_eq!(spec.eigenvalues, vec![c(-1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]);
    }

    #[test]
    fn free_chain_spectrum_is_sums_of_onsite_levels() {
        let spec = build_spin_model(2, 3, 1);
        let k = assemble_full_hamiltonian(&spec, c(0.0, 0.0)).unwrap();
        let ev = exact_spectrum(&k).unwrap().eigenvalues;
        let expected = [0.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 3.0];
        for (l, x) in ev.iter().zip(expected) {
            assert!((l.re - x).abs() < 1e-12 && l.im.abs() < 1e-12);
        }
    }

    /// Roots of the characteristic polynomial through its companion matrix.
    fn companion_roots(m: &CMatrix) -> Vec<C64> {
        let n = m.nrows();
        // Faddeev-LeVerrier: coefficients of det(λ − m)
        let mut coeffs = vec![c(1.0, 0.0)];
        let mut mk = CMatrix::zeros(n, n);
        let id = CMatrix::identity(n, n);
        for k in 1..=n {
            mk = m * (&mk + &id * coeffs[k - 1]);
            let ck = -mk.trace() / c(k as f64, 0.0);
            coeffs.push(ck);
        }
        let mut comp = CMatrix::zeros(n, n);
        for i in 1..n {
            comp[(i, i - 1)] = c(1.0, 0.0);
        }
        for i in 0..n {
            comp[(i, n - 1)] = -coeffs[n - i];
        }
        let mut roots: Vec<C64> = nalgebra::Schur::new(comp).eigenvalues().unwrap().iter().copied().collect();
        roots.sort_by(|a, b| a.re.total_cmp(&b.re));
        roots
    }

    #[test]
    fn hermitian_spectrum_matches_characteristic_polynomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = CMatrix::from_fn(8, 8, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let h = (&a + a.adjoint()) * c(0.5, 0.0);
        let k = FullHamiltonian { matrix: h.clone(), tau: c(0.1, 0.0) };
        let ev = exact_spectrum(&k).unwrap();
        assert!(ev.hermitian);
        let roots = companion_roots(&h);
        for (l, r) in ev.eigenvalues.iter().zip(&roots) {
            assert!((l - r).norm() < 1e-9, "{l} vs {r}");
        }
    }

    #[test]
    fn nearest_reports_isolation_and_collisions() {
        let s = SpectrumResult {
            eigenvalues: vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0 + 1e-8, 0.0)],
            hermitian: true,
        };
        let near0 = s.nearest(c(1e-3, 0.0), 0.25);
        assert_eq!(near0.value, c(0.0, 0.0));
        assert!((near0.isolation - 1.0).abs() < 1e-15);
        assert!(!near0.collision);
        assert_eq!(near0.in_disk, 1);
        assert!(s.nearest(c(1.0, 0.0), 0.25).collision);
    }

    #[test]
    fn gap_at_zero_coupling() {
        let spec = build_spin_model(2, 4, 2);
        let cfg = EngineConfig::default();
        let report = run_blockdiag(&spec, &cfg).unwrap();
        let gap = check_gap(&spec, &cfg, &report).unwrap();
        assert!(gap.margin >= 1.0 - 1e-12);
        assert!(gap.pass);
        assert!(gap.vacuum_column_residual < 1e-15);
    }

    #[test]
    fn gap_is_symmetric_under_conjugate_coupling() {
        let spec = build_spin_model(2, 4, 2);
        let tau = c(0.015, 0.01);
        let cfg = EngineConfig::with_tau(tau);
        let cfg_bar = EngineConfig::with_tau(tau.conj());
        let g = check_gap(&spec, &cfg, &run_blockdiag(&spec, &cfg).unwrap()).unwrap();
        let g_bar = check_gap(&spec, &cfg_bar, &run_blockdiag(&spec, &cfg_bar).unwrap()).unwrap();
        assert!((g.margin - g_bar.margin).abs() < 1e-10);
        assert!(g.pass && g.vacuum_column_residual < 1e-9);
    }

    #[test]
    fn zero_generator_residual_is_plain_difference() {
        let a = CMatrix::from_fn(4, 4, |i, j| c((i + 2 * j) as f64, 0.0));
        let b = CMatrix::from_fn(4, 4, |i, j| c((i * j) as f64, 1.0));
        let r = direct_conjugation_check(&a, &CMatrix::zeros(4, 4), &b).unwrap();
        assert!((r - operator_norm(&(&a - &b))).abs() < 1e-12);
    }

    /// Single-step residual on N = 2 with the whole chain as the step interval.
    fn first_step_residual(tau: f64) -> f64 {
        let spec = build_spin_model(2, 2, 3);
        let cfg = EngineConfig::with_tau(c(tau, 0.0));
        let mut engine = BlockDiagonalizer::new(&spec, &cfg).unwrap();
        let before = engine.final_hamiltonian().unwrap();
        let out = engine.step().unwrap().unwrap();
        let after = engine.final_hamiltonian().unwrap();
        let chain = IntervalSupport::chain(2);
        let (dl, dr) = padding_dims(out.step.interval(), chain, 2);
        let s = pad_identity(&out.s, dl, dr);
        direct_conjugation_check(&before, &s, &after).unwrap()
    }

    #[test]
    fn single_step_matches_direct_conjugation() {
        assert!(first_step_residual(0.02) < 1e-9);
        assert!(first_step_residual(0.05) < 1e-9);
    }

    #[test]
    fn unitarity_of_exponentials() {
        assert_eq!(unitarity_check(&CMatrix::identity(5, 5)), 0.0);
        let a = CMatrix::from_fn(6, 6, |i, j| c(0.1 * (i as f64 - j as f64), 0.05 * (i + j) as f64));
        let skew = &a - a.adjoint();
        let u = matrix_exponential(&skew).unwrap();
        assert!(unitarity_check(&u) < 1e-12);
    }

    #[test]
    fn accumulated_conjugation_is_unitary() {
        let spec = build_spin_model(2, 4, 11);
        let cfg = EngineConfig {
            track_u: true,
            ..EngineConfig::with_tau(c(0.02, 0.0))
        };
        let mut engine = BlockDiagonalizer::new(&spec, &cfg).unwrap();
        engine.run_to_end().unwrap();
        let (u, _) = engine.conjugation().unwrap();
        assert!(unitarity_check(u) < 1e-9);
    }
}
