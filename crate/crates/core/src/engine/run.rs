use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::alpha::{apply_alpha, AlphaStats};
use super::bounds::{tau_domain_estimate, DEFAULT_DELTA};
use super::series::{build_g, lie_schwinger_series, SeriesDiagnostics};
use super::{EngineConfig, PotentialTable, StepIndex};
use crate::algebra::{
    complement_block, eigenvalues, matrix_exponential, operator_norm, pad_identity, padding_dims, CMatrix,
    IntervalSupport, LocalOperator, LocalSpace, C64,
};
use crate::error::{Error, Result};
use crate::models::{assemble_full_hamiltonian_capped, check_dim_cap, embed_sum, ChainSpec};
use crate::numfmt;

/// Largest final weighted norm among intervals with `edges` edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthNorm {
    pub edges: usize,
    pub max_weighted_norm: f64,
    /// `|τ|^{(edges-1)/4}`
    pub decay_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalExpectation {
    pub left: usize,
    pub edges: usize,
    #[serde(with = "numfmt::complex")]
    pub value: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub n_sites: usize,
    pub local_dim: usize,
    #[serde(with = "numfmt::complex")]
    pub tau: C64,
    #[serde(with = "numfmt::complex")]
    pub e_n: C64,
    /// Distance from `E_N` to the rest of the spectrum of the final
    /// Hamiltonian on the complement of the chain vacuum.
    pub gap_margin: f64,
    /// Largest `‖P⁺ V P⁻‖`-type residual over all final entries.
    pub blockdiag_residual: f64,
    pub per_length_norms: Vec<LengthNorm>,
    pub t0_estimate: f64,
    pub a_root: f64,
    pub vacuum_expectations: Vec<IntervalExpectation>,
    pub diagnostics: Vec<SeriesDiagnostics>,
    /// `‖U†U − 1‖_F`, when the conjugation was tracked.
    pub unitarity_defect: Option<f64>,
    /// `‖U⁻¹ K_N U − K̃_N‖_F`, when the conjugation was tracked.
    pub conjugation_residual: Option<f64>,
    /// `‖K_N‖`, when the conjugation was tracked.
    pub k_norm: Option<f64>,
    pub wall_time: f64,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        numfmt::to_json(self)
    }

    /// Same report with the timing zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> RunReport {
        RunReport {
            wall_time: 0.0,
            ..self.clone()
        }
    }
}

/// Engine state between steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub table: PotentialTable,
    pub diagnostics: Vec<SeriesDiagnostics>,
    #[serde(with = "numfmt::opt_cmatrix", default)]
    pub u: Option<CMatrix>,
    #[serde(with = "numfmt::opt_cmatrix", default)]
    pub u_inv: Option<CMatrix>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, numfmt::to_json(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        numfmt::from_json(&text)
    }
}

/// What one step produced.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub step: StepIndex,
    pub g: CMatrix,
    pub e: C64,
    pub s: CMatrix,
    pub v_diag: CMatrix,
    pub diagnostics: SeriesDiagnostics,
    pub alpha: AlphaStats,
}

/// Step-by-step driver over the whole sequence.
pub struct BlockDiagonalizer {
    spec: ChainSpec,
    space: LocalSpace,
    cfg: EngineConfig,
    a_root: f64,
    t0: f64,
    table: PotentialTable,
    diagnostics: Vec<SeriesDiagnostics>,
    u: Option<(CMatrix, CMatrix)>,
    started: Instant,
}

impl BlockDiagonalizer {
    pub fn new(spec: &ChainSpec, cfg: &EngineConfig) -> Result<Self> {
        spec.validate()?;
        cfg.validate()?;
        let space = spec.local_space()?;
        let table = PotentialTable::initial(spec, &space, cfg.tau);
        let u = if cfg.track_u {
            let dim = check_dim_cap(spec.local_dim, spec.n_sites, cfg.dim_cap)?;
            Some((CMatrix::identity(dim, dim), CMatrix::identity(dim, dim)))
        } else {
            None
        };
        let est = tau_domain_estimate(DEFAULT_DELTA)?;
        Ok(BlockDiagonalizer {
            spec: spec.clone(),
            space,
            cfg: cfg.clone(),
            a_root: est.a_root,
            t0: est.t0,
            table,
            diagnostics: Vec::new(),
            u,
            started: Instant::now(),
        })
    }

    pub fn from_checkpoint(spec: &ChainSpec, cfg: &EngineConfig, checkpoint: Checkpoint) -> Result<Self> {
        let mut engine = BlockDiagonalizer::new(spec, cfg)?;
        let t = &checkpoint.table;
        if t.n_sites != spec.n_sites || t.local_dim != spec.local_dim || t.tau != cfg.tau {
            return Err(Error::Config("checkpoint does not match the chain or coupling".into()));
        }
        if cfg.track_u != checkpoint.u.is_some() || checkpoint.u.is_some() != checkpoint.u_inv.is_some() {
            return Err(Error::Config("checkpoint and config disagree on tracking U".into()));
        }
        engine.u = checkpoint.u.zip(checkpoint.u_inv);
        engine.table = checkpoint.table;
        engine.diagnostics = checkpoint.diagnostics;
        Ok(engine)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            table: self.table.clone(),
            diagnostics: self.diagnostics.clone(),
            u: self.u.as_ref().map(|(u, _)| u.clone()),
            u_inv: self.u.as_ref().map(|(_, ui)| ui.clone()),
        }
    }

    pub fn table(&self) -> &PotentialTable {
        &self.table
    }

    pub fn space(&self) -> &LocalSpace {
        &self.space
    }

    pub fn spec(&self) -> &ChainSpec {
        &self.spec
    }

    pub fn diagnostics(&self) -> &[SeriesDiagnostics] {
        &self.diagnostics
    }

    pub fn a_root(&self) -> f64 {
        self.a_root
    }

    /// Accumulated `U_N` and its inverse, when tracked.
    pub fn conjugation(&self) -> Option<(&CMatrix, &CMatrix)> {
        self.u.as_ref().map(|(u, ui)| (u, ui))
    }

    pub fn next_step(&self) -> Option<StepIndex> {
        self.table.step.successor(self.spec.n_sites)
    }

    pub fn is_done(&self) -> bool {
        self.next_step().is_none()
    }

    /// Process the next step; `None` once the sequence is exhausted.
    pub fn step(&mut self) -> Result<Option<StepOutcome>> {
        let Some(step) = self.next_step() else {
            return Ok(None);
        };
        let interval = step.interval();
        let tau = self.cfg.tau;
        let (g, e) = build_g(&self.table, step, &self.space, self.cfg.residual_tol)?;
        let v = self
            .table
            .operator(&interval)
            .ok_or(Error::InvalidInterval {
                interval,
                n_sites: self.spec.n_sites,
            })?;
        let proj = self.space.vacuum_projectors(interval);
        let series = lie_schwinger_series(&g, e, &v, &proj, &self.space, &self.cfg, step, self.a_root)?;
        let mut diagnostics = series.diagnostics;

        if self.cfg.neumann_check {
            let pert = crate::verify::neumann_perturbation(&self.table, step, &self.space);
            let h0 = self.space.free_hamiltonian(interval).matrix;
            let direct = crate::algebra::reduced_resolvent(&g, e, C64::new(0.0, 0.0), &proj)?;
            let (series_r, _) = crate::verify::neumann_resolvent(&h0, &pert, C64::new(0.0, 0.0), &proj)?;
            diagnostics.neumann_deviation = Some(operator_norm(&(series_r - direct)));
        }

        let after = &g + &series.v_diag * tau;
        let e_after = e
            + tau
                * self.space.vacuum_expectation(&LocalOperator {
                    support: interval,
                    matrix: series.v_diag.clone(),
                });
        diagnostics.local_gap = spectral_margin(&after, e_after, &proj, tau.im == 0.0)?;

        let (next, alpha) = apply_alpha(&self.table, step, &series.s, &series.v_diag, &self.space, self.cfg.tail_tol)?;
        diagnostics.ad_terms = alpha.max_terms;

        if let Some((u, u_inv)) = self.u.as_mut() {
            let chain = IntervalSupport::chain(self.spec.n_sites);
            let (dl, dr) = padding_dims(interval, chain, self.spec.local_dim);
            let es = pad_identity(&matrix_exponential(&series.s)?, dl, dr);
            let ems = pad_identity(&matrix_exponential(&(-&series.s))?, dl, dr);
            *u = &*u * ems;
            *u_inv = es * &*u_inv;
        }

        self.table = next;
        self.diagnostics.push(diagnostics.clone());
        Ok(Some(StepOutcome {
            step,
            g,
            e,
            s: series.s,
            v_diag: series.v_diag,
            diagnostics,
            alpha,
        }))
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        while self.step()?.is_some() {}
        Ok(())
    }

    /// `K̃_N = Σ H_i + τ Σ V_I` from the current table on the whole chain.
    pub fn final_hamiltonian(&self) -> Result<CMatrix> {
        final_hamiltonian(&self.spec, &self.table, self.cfg.dim_cap)
    }

    pub fn report(&self) -> Result<RunReport> {
        if !self.is_done() {
            return Err(Error::Config(format!("run stopped at step {}", self.table.step)));
        }
        let n = self.spec.n_sites;
        let tau = self.cfg.tau;
        let table = &self.table;

        let mut blockdiag_residual: f64 = 0.0;
        let mut per_length = vec![0.0f64; n];
        for (iv, m) in &table.entries {
            let proj = self.space.vacuum_projectors(*iv);
            blockdiag_residual = blockdiag_residual.max(proj.off_diagonal_residual(m));
            let w = self.space.weighted_norm(&LocalOperator {
                support: *iv,
                matrix: m.clone(),
            });
            per_length[iv.edges] = per_length[iv.edges].max(w);
        }
        let per_length_norms = (1..n)
            .map(|edges| LengthNorm {
                edges,
                max_weighted_norm: per_length[edges],
                decay_bound: tau.norm().powf((edges as f64 - 1.0) / 4.0),
            })
            .collect();

        let (unitarity_defect, conjugation_residual, k_norm) = match &self.u {
            Some((u, u_inv)) => {
                let dim = u.nrows();
                let k = assemble_full_hamiltonian_capped(&self.spec, tau, self.cfg.dim_cap)?.matrix;
                let k_tilde = self.final_hamiltonian()?;
                let defect = (u.adjoint() * u - CMatrix::identity(dim, dim)).norm();
                let residual = (u_inv * &k * u - k_tilde).norm();
                (Some(defect), Some(residual), Some(operator_norm(&k)))
            }
            None => (None, None, None),
        };

        Ok(RunReport {
            n_sites: n,
            local_dim: self.spec.local_dim,
            tau,
            e_n: table.vacuum_energy(),
            gap_margin: self.diagnostics.last().map_or(f64::NAN, |d| d.local_gap),
            blockdiag_residual,
            per_length_norms,
            t0_estimate: self.t0,
            a_root: self.a_root,
            vacuum_expectations: table
                .vacuum_expectations
                .iter()
                .map(|(iv, v)| IntervalExpectation {
                    left: iv.left,
                    edges: iv.edges,
                    value: *v,
                })
                .collect(),
            diagnostics: self.diagnostics.clone(),
            unitarity_defect,
            conjugation_residual,
            k_norm,
            wall_time: self.started.elapsed().as_secs_f64(),
        })
    }
}

/// `K̃ = Σ H_i + τ Σ V_I` on the whole chain for a given table.
pub fn final_hamiltonian(spec: &ChainSpec, table: &PotentialTable, cap: usize) -> Result<CMatrix> {
    let onsite: Vec<LocalOperator> = (1..=spec.n_sites)
        .map(|i| LocalOperator {
            support: IntervalSupport::site(i),
            matrix: spec.h_local.clone(),
        })
        .collect();
    let entries: Vec<LocalOperator> = table
        .entries
        .iter()
        .map(|(iv, m)| LocalOperator {
            support: *iv,
            matrix: m.clone(),
        })
        .collect();
    let one = C64::new(1.0, 0.0);
    embed_sum(
        onsite.iter().map(|op| (op, one)).chain(entries.iter().map(|op| (op, table.tau))),
        spec.local_dim,
        spec.n_sites,
        cap,
    )
}

/// `min |λ − e|` over the spectrum of `h` on the complement of the vacuum.
pub(crate) fn spectral_margin(
    h: &CMatrix,
    e: C64,
    proj: &crate::algebra::VacuumProjectors,
    hermitian: bool,
) -> Result<f64> {
    let block = complement_block(h, proj);
    let spectrum = eigenvalues(&block, hermitian)?;
    Ok(spectrum.iter().map(|l| (l - e).norm()).fold(f64::INFINITY, f64::min))
}

/// Run every step and summarize.
pub fn run_blockdiag(spec: &ChainSpec, cfg: &EngineConfig) -> Result<RunReport> {
    let mut engine = BlockDiagonalizer::new(spec, cfg)?;
    engine.run_to_end()?;
    engine.report()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_spin_model;

    #[test]
    fn zero_coupling_run() {
        let spec = build_spin_model(2, 4, 3);
        let report = run_blockdiag(&spec, &EngineConfig::default()).unwrap();
        assert_eq!(report.e_n, C64::new(0.0, 0.0));
        assert!(report.gap_margin >= 1.0 - 1e-12);
        let mut engine = BlockDiagonalizer::new(&spec, &EngineConfig::default()).unwrap();
        engine.run_to_end().unwrap();
        let k = engine.final_hamiltonian().unwrap();
        let free = assemble_full_hamiltonian_capped(&spec, C64::new(0.0, 0.0), 4096).unwrap().matrix;
        assert_eq!(k, free);
    }

    #[test]
    fn checkpoint_resume_is_bit_identical() {
        let spec = build_spin_model(2, 4, 5);
        let cfg = EngineConfig {
            track_u: true,
            ..EngineConfig::with_tau(C64::new(0.02, 0.01))
        };
        let full = run_blockdiag(&spec, &cfg).unwrap();

        let mut engine = BlockDiagonalizer::new(&spec, &cfg).unwrap();
        for _ in 0..3 {
            engine.step().unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        engine.checkpoint().save(&path).unwrap();
        let ck = Checkpoint::load(&path).unwrap();
        assert_eq!(ck, engine.checkpoint());
        let mut resumed = BlockDiagonalizer::from_checkpoint(&spec, &cfg, ck).unwrap();
        resumed.run_to_end().unwrap();
        let report = resumed.report().unwrap();
        assert_eq!(
            report.without_timing().to_json().unwrap(),
            full.without_timing().to_json().unwrap()
        );
    }

    #[test]
    fn processed_entries_never_change() {
        let spec = build_spin_model(2, 5, 9);
        let mut engine = BlockDiagonalizer::new(&spec, &EngineConfig::with_tau(C64::new(0.03, 0.0))).unwrap();
        let mut frozen: Vec<(IntervalSupport, CMatrix)> = Vec::new();
        while let Some(out) = engine.step().unwrap() {
            for (iv, m) in &frozen {
                assert_eq!(engine.table().get(iv), Some(m), "{iv} changed at {}", out.step);
            }
            let iv = out.step.interval();
            frozen.push((iv, engine.table().get(&iv).unwrap().clone()));
        }
    }

    #[test]
    fn report_rejects_unfinished_run() {
        let spec = build_spin_model(2, 3, 1);
        let engine = BlockDiagonalizer::new(&spec, &EngineConfig::default()).unwrap();
        assert!(engine.report().is_err());
    }
}
