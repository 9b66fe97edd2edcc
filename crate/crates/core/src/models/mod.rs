//! Chain specifications and the dense full-chain Hamiltonian.

mod builders;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use builders::{
    build_anharmonic_model, build_spin_model, normalize_onsite, oscillator_position, SpinCoupling, SpinModel,
};

use crate::algebra::{hermitian_defect, pad_identity, CMatrix, CVector, IntervalSupport, LocalOperator, LocalSpace, C64};
use crate::error::{Error, Result};
use crate::numfmt;

/// Default row cap for dense full-chain matrices.
pub const DEFAULT_DIM_CAP: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Spin,
    Anharmonic,
    Custom,
}

/// A translation-invariant seed potential of a given edge count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedPotential {
    pub edges: usize,
    #[serde(with = "numfmt::cmatrix")]
    pub matrix: CMatrix,
}

/// Everything needed to define `K_N(τ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub model: ModelKind,
    pub n_sites: usize,
    pub local_dim: usize,
    #[serde(default)]
    pub rng_seed: Option<u64>,
    #[serde(default)]
    pub d_trunc: Option<usize>,
    pub kbar: usize,
    pub translation_invariant: bool,
    #[serde(with = "numfmt::cmatrix")]
    pub h_local: CMatrix,
    #[serde(with = "numfmt::cvector")]
    pub omega: CVector,
    pub seeds: Vec<SeedPotential>,
    /// Frobenius distance between `(x_d)^4` and the exact `x^4` restricted
    /// to the first `d` oscillator levels (anharmonic model only).
    #[serde(default)]
    pub truncation_discrepancy: Option<f64>,
}

impl ChainSpec {
    pub fn validate(&self) -> Result<()> {
        let d = self.local_dim;
        if self.n_sites < 2 {
            return Err(Error::InvalidSpec(format!("n_sites must be at least 2, got {}", self.n_sites)));
        }
        if self.h_local.nrows() != d || self.h_local.ncols() != d || self.omega.len() != d {
            return Err(Error::InvalidSpec(format!("local operators do not match local_dim {d}")));
        }
        if (self.omega.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSpec("omega is not a unit vector".into()));
        }
        if (&self.h_local * &self.omega).norm() > 1e-12 {
            return Err(Error::InvalidSpec("h_local does not annihilate omega".into()));
        }
        if self.kbar == 0 {
            return Err(Error::InvalidSpec("kbar must be at least 1".into()));
        }
        for seed in &self.seeds {
            if seed.edges == 0 || seed.edges > self.kbar {
                return Err(Error::InvalidSpec(format!("seed with {} edges outside 1..={}", seed.edges, self.kbar)));
            }
            let dim = d.pow(seed.edges as u32 + 1);
            if seed.matrix.nrows() != dim || seed.matrix.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: seed.matrix.nrows(),
                });
            }
            if hermitian_defect(&seed.matrix) > 1e-12 * seed.matrix.norm().max(1.0) {
                return Err(Error::InvalidSpec(format!("seed with {} edges is not Hermitian", seed.edges)));
            }
        }
        if !self.translation_invariant {
            return Err(Error::InvalidSpec(
                "only translation-invariant seed families are supported".into(),
            ));
        }
        Ok(())
    }

    pub fn local_space(&self) -> Result<LocalSpace> {
        LocalSpace::new(self.h_local.clone(), self.omega.clone())
    }

    /// The same model on a chain of `n` sites.
    pub fn with_n_sites(&self, n: usize) -> ChainSpec {
        ChainSpec {
            n_sites: n,
            ..self.clone()
        }
    }

    /// Initial potentials `V_{I_{k,i}}` for every seeded interval that fits the chain.
    pub fn initial_potentials(&self) -> Vec<LocalOperator> {
        let mut out = Vec::new();
        for seed in &self.seeds {
            for left in 1..=self.n_sites.saturating_sub(seed.edges) {
                out.push(LocalOperator {
                    support: IntervalSupport::new(left, seed.edges),
                    matrix: seed.matrix.clone(),
                });
            }
        }
        out
    }

    pub fn seed(&self, edges: usize) -> Option<&CMatrix> {
        self.seeds.iter().find(|s| s.edges == edges).map(|s| &s.matrix)
    }

    pub fn to_json(&self) -> Result<String> {
        numfmt::to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ChainSpec = numfmt::from_json(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Dense `K_N(τ)` on the whole chain.
#[derive(Clone, Debug)]
pub struct FullHamiltonian {
    pub matrix: CMatrix,
    pub tau: C64,
}

impl FullHamiltonian {
    pub fn is_hermitian(&self) -> bool {
        hermitian_defect(&self.matrix) <= 1e-12 * self.matrix.norm().max(1.0)
    }
}

pub(crate) fn check_dim_cap(d: usize, n: usize, cap: usize) -> Result<usize> {
    let dim = (d as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if dim > cap as u128 {
        return Err(Error::DimensionCap {
            dim: dim.min(usize::MAX as u128) as usize,
            cap,
        });
    }
    Ok(dim as usize)
}

/// Sum of local terms, each padded by identities to the whole chain.
pub fn embed_sum<'a>(
    terms: impl IntoIterator<Item = (&'a LocalOperator, C64)>,
    d: usize,
    n_sites: usize,
    cap: usize,
) -> Result<CMatrix> {
    let dim = check_dim_cap(d, n_sites, cap)?;
    let chain = IntervalSupport::chain(n_sites);
    let mut out = CMatrix::zeros(dim, dim);
    for (op, weight) in terms {
        op.support.check_fits(n_sites)?;
        let (dl, dr) = crate::algebra::padding_dims(op.support, chain, d);
        out += pad_identity(&(&op.matrix * weight), dl, dr);
    }
    Ok(out)
}

pub fn assemble_full_hamiltonian(spec: &ChainSpec, tau: C64) -> Result<FullHamiltonian> {
    assemble_full_hamiltonian_capped(spec, tau, DEFAULT_DIM_CAP)
}

pub fn assemble_full_hamiltonian_capped(spec: &ChainSpec, tau: C64, cap: usize) -> Result<FullHamiltonian> {
    let d = spec.local_dim;
    let onsite: Vec<LocalOperator> = (1..=spec.n_sites)
        .map(|i| LocalOperator {
            support: IntervalSupport::site(i),
            matrix: spec.h_local.clone(),
        })
        .collect();
    let potentials = spec.initial_potentials();
    let one = C64::new(1.0, 0.0);
    let matrix = embed_sum(
        onsite.iter().map(|op| (op, one)).chain(potentials.iter().map(|op| (op, tau))),
        d,
        spec.n_sites,
        cap,
    )?;
    Ok(FullHamiltonian { matrix, tau })
}
