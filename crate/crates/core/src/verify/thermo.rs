use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::C64;
use crate::engine::{run_blockdiag, tau_domain_estimate, EngineConfig, RunReport, DEFAULT_DELTA};
use crate::error::{Error, Result};
use crate::models::ChainSpec;

/// `(2/N) Σ_{l=1}^{N} l |τ|^{(l-1)/4} + 2 Σ_{l>N} |τ|^{(l-1)/4}`
pub fn thermo_majorant(n: usize, tau_abs: f64) -> f64 {
    let x = tau_abs.powf(0.25);
    if x >= 1.0 {
        return f64::INFINITY;
    }
    let head: f64 = (1..=n).map(|l| l as f64 * x.powi(l as i32 - 1)).sum();
    2.0 * head / n as f64 + 2.0 * x.powi(n as i32) / (1.0 - x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermoPair {
    pub n: usize,
    pub m: usize,
    /// `|E_N/N − E_M/M|`
    pub diff: f64,
    /// Majorant evaluated at the smaller length.
    pub bound: f64,
    pub below: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermoReport {
    #[serde(with = "crate::numfmt::complex")]
    pub tau: C64,
    pub n_list: Vec<usize>,
    #[serde(with = "super::complex_list")]
    pub energies: Vec<C64>,
    /// `E_N / N`
    #[serde(with = "super::complex_list")]
    pub per_site: Vec<C64>,
    pub pairs: Vec<ThermoPair>,
    /// `|E_N − Σ_l (N−l) τ <V_l>|` per chain length.
    pub decomposition_residuals: Vec<f64>,
    /// Largest spread of `<V_{l,i}>` over the left end `i`, over all runs.
    pub site_spread: f64,
    /// `|τ<V_l>| ≤ 2|τ|^{(l-1)/4}` for every run and length.
    pub length_bound_ok: bool,
    /// `|τ<V_l>^{(N)} − E_{l+1}|` whenever a chain with `l+1` sites was also
    /// run: `(N, l, difference)`.
    pub length_energy_comparison: Vec<(usize, usize, f64)>,
    /// `|τ| ≤ t0`, where the majorant comparison is expected to hold.
    pub within_disk: bool,
}

impl ThermoReport {
    pub fn all_pairs_below(&self) -> bool {
        self.pairs.iter().all(|p| p.below)
    }
}

/// Runs the engine for each chain length in `n_list` (ascending) with the
/// potentials of `base` and compares the energies per site.
pub fn thermo_analysis(base: &ChainSpec, cfg: &EngineConfig, n_list: &[usize]) -> Result<ThermoReport> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("chain lengths must be non-empty and strictly ascending".into()));
    }
    if !base.translation_invariant {
        return Err(Error::Config("per-site analysis needs translation-invariant potentials".into()));
    }
    let tau = cfg.tau;
    let runs: Vec<RunReport> = n_list
        .par_iter()
        .map(|&n| run_blockdiag(&base.with_n_sites(n), cfg))
        .collect::<Result<_>>()?;

    let mut site_spread: f64 = 0.0;
    let mut decomposition_residuals = Vec::with_capacity(runs.len());
    let mut length_bound_ok = true;
    let mut by_length: Vec<BTreeMap<usize, C64>> = Vec::with_capacity(runs.len());
    for (run, &n) in runs.iter().zip(n_list) {
        let mut first: BTreeMap<usize, C64> = BTreeMap::new();
        for ex in &run.vacuum_expectations {
            let reference = *first.entry(ex.edges).or_insert(ex.value);
            site_spread = site_spread.max((ex.value - reference).norm());
        }
        let decomposition: C64 = first.iter().map(|(&l, v)| tau * v * (n - l) as f64).sum();
        decomposition_residuals.push((run.e_n - decomposition).norm());
        length_bound_ok &= first
            .iter()
            .all(|(&l, v)| (tau * v).norm() <= 2.0 * tau.norm().powf((l as f64 - 1.0) / 4.0));
        by_length.push(first);
    }

    let energies: Vec<C64> = runs.iter().map(|r| r.e_n).collect();
    let per_site: Vec<C64> = energies.iter().zip(n_list).map(|(e, &n)| e / n as f64).collect();
    let mut pairs = Vec::new();
    for a in 0..n_list.len() {
        for b in a + 1..n_list.len() {
            let diff = (per_site[a] - per_site[b]).norm();
            let bound = thermo_majorant(n_list[a], tau.norm());
            pairs.push(ThermoPair {
                n: n_list[a],
                m: n_list[b],
                diff,
                bound,
                below: diff <= bound,
            });
        }
    }

    let mut length_energy_comparison = Vec::new();
    for (lengths, &n) in by_length.iter().zip(n_list) {
        for (&l, v) in lengths {
            if let Some(idx) = n_list.iter().position(|&m| m == l + 1) {
                length_energy_comparison.push((n, l, (tau * v - energies[idx]).norm()));
            }
        }
    }

    let t0 = tau_domain_estimate(DEFAULT_DELTA)?.t0;
    Ok(ThermoReport {
        tau,
        n_list: n_list.to_vec(),
        energies,
        per_site,
        pairs,
        decomposition_residuals,
        site_spread,
        length_bound_ok,
        length_energy_comparison,
        within_disk: tau.norm() <= t0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_spin_model;

    #[test]
    fn majorant_matches_direct_sum() {
        let t: f64 = 0.02;
        let x = t.powf(0.25);
        for n in [1, 3, 7] {
            let direct: f64 = (1..=n).map(|l| l as f64 * x.powi(l as i32 - 1)).sum::<f64>() * 2.0 / n as f64
                + 2.0 * (n + 1..4000).map(|l| x.powi(l as i32 - 1)).sum::<f64>();
            assert!((thermo_majorant(n, t) - direct).abs() < 1e-12 * direct);
        }
        assert!(thermo_majorant(3, 1.0).is_infinite());
    }

    #[test]
    fn zero_coupling_is_trivial() {
        let spec = build_spin_model(2, 3, 4);
        let report = thermo_analysis(&spec, &EngineConfig::default(), &[3, 4, 5]).unwrap();
        assert!(report.energies.iter().all(|e| *e == C64::new(0.0, 0.0)));
        assert!(report.pairs.iter().all(|p| p.diff == 0.0 && p.below));
        assert!(report.decomposition_residuals.iter().all(|r| *r == 0.0));
    }

    #[test]
    fn small_coupling_ladder() {
        let spec = build_spin_model(2, 3, 4);
        let report = thermo_analysis(&spec, &EngineConfig::with_tau(C64::new(0.02, 0.0)), &[3, 4, 5, 6]).unwrap();
        assert!(report.site_spread <= 1e-12, "{}", report.site_spread);
        assert!(report.decomposition_residuals.iter().all(|r| *r < 1e-10));
        assert!(report.all_pairs_below());
        assert!(report.length_bound_ok);
    }

    #[test]
    fn rejects_unsorted_lengths() {
        let spec = build_spin_model(2, 3, 4);
        assert!(thermo_analysis(&spec, &EngineConfig::default(), &[4, 3]).is_err());
    }
}
