use lschain::algebra::{hermitian_defect, CMatrix, IntervalSupport, C64};
use lschain::engine::step_sequence;
use lschain::models::assemble_full_hamiltonian;
use lschain::verify::check_gap_engine;
use lschain::{build_anharmonic_model, build_spin_model, run_blockdiag, BlockDiagonalizer, ChainSpec, EngineConfig};
use nalgebra::SymmetricEigen;
use proptest::prelude::*;

fn finished(spec: &ChainSpec, tau: C64) -> BlockDiagonalizer {
    let mut engine = BlockDiagonalizer::new(spec, &EngineConfig::with_tau(tau)).unwrap();
    engine.run_to_end().unwrap();
    engine
}

/// First and second Rayleigh-Schrodinger coefficients of the lowest level,
/// from dense matrices: K(0) has a simple ground state, V = K(1) - K(0).
fn rayleigh_schrodinger(spec: &ChainSpec) -> (f64, f64) {
    let h0 = assemble_full_hamiltonian(spec, C64::new(0.0, 0.0)).unwrap().matrix;
    let v: CMatrix = assemble_full_hamiltonian(spec, C64::new(1.0, 0.0)).unwrap().matrix - &h0;
    let eig = SymmetricEigen::new(h0);
    let ground = eig.eigenvalues.imin();
    let e0 = eig.eigenvalues[ground];
    let omega = eig.eigenvectors.column(ground).into_owned();
    let e1 = omega.dotc(&(&v * &omega)).re;
    let e2 = (0..eig.eigenvalues.len())
        .filter(|&n| n != ground)
        .map(|n| {
            let amp = eig.eigenvectors.column(n).dotc(&(&v * &omega));
            -amp.norm_sqr() / (eig.eigenvalues[n] - e0)
        })
        .sum();
    (e1, e2)
}

#[test]
fn energy_matches_low_order_perturbation_theory() {
    for spec in [build_spin_model(2, 4, 11), build_anharmonic_model(3, 3).unwrap()] {
        let (e1, e2) = rayleigh_schrodinger(&spec);
        let e_free = finished(&spec, C64::new(0.0, 0.0)).report().unwrap().e_n;
        for t in [1e-3, -2e-3] {
            let e = finished(&spec, C64::new(t, 0.0)).report().unwrap().e_n - e_free;
            let remainder = (e - (e1 * t + e2 * t * t)).norm();
            assert!(remainder < 50.0 * t.abs().powi(3), "t={t}: remainder {remainder:e}");
        }
    }
}

#[test]
fn step_order_is_lexicographic_and_covers_every_proper_interval() {
    for n in 2..8 {
        let steps = step_sequence(n);
        assert!(steps.windows(2).all(|w| (w[0].k, w[0].q) < (w[1].k, w[1].q)));
        assert_eq!(steps.len(), n * (n - 1) / 2);
        for s in &steps {
            let iv = s.interval();
            assert_eq!(iv.edges, s.k);
            assert!(IntervalSupport::chain(n).contains(&iv));
        }
    }
}

#[test]
fn vacuum_column_of_final_hamiltonian() {
    let spec = build_spin_model(2, 5, 3);
    for tau in [C64::new(0.03, 0.0), C64::new(0.0, 0.02), C64::new(-0.01, 0.015)] {
        let gap = check_gap_engine(&finished(&spec, tau)).unwrap();
        assert!(gap.vacuum_column_residual < 1e-10, "{tau}: {}", gap.vacuum_column_residual);
        assert!(gap.pass);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conjugate_coupling_gives_conjugate_energy(seed in 0u64..1000, re in -0.03f64..0.03, im in -0.03f64..0.03) {
        let spec = build_spin_model(2, 4, seed);
        let a = run_blockdiag(&spec, &EngineConfig::with_tau(C64::new(re, im))).unwrap();
        let b = run_blockdiag(&spec, &EngineConfig::with_tau(C64::new(re, -im))).unwrap();
        prop_assert!((a.e_n - b.e_n.conj()).norm() < 1e-12);
    }

    #[test]
    fn real_coupling_keeps_table_hermitian(seed in 0u64..1000, t in -0.05f64..0.05) {
        let engine = finished(&build_spin_model(2, 4, seed), C64::new(t, 0.0));
        for m in engine.table().entries.values() {
            prop_assert!(hermitian_defect(m) < 1e-12);
        }
        prop_assert!(engine.report().unwrap().e_n.im.abs() < 1e-14);
    }

    #[test]
    fn real_coupling_energy_is_ground_state(seed in 0u64..1000, t in -0.05f64..0.05) {
        let spec = build_spin_model(2, 3, seed);
        let e = run_blockdiag(&spec, &EngineConfig::with_tau(C64::new(t, 0.0))).unwrap().e_n;
        let k = assemble_full_hamiltonian(&spec, C64::new(t, 0.0)).unwrap().matrix;
        let lowest = SymmetricEigen::new(k).eigenvalues.min();
        prop_assert!((e.re - lowest).abs() < 1e-9);
    }
}
