use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::StepIndex;
use crate::algebra::{CMatrix, IntervalSupport, LocalOperator, LocalSpace, C64};
use crate::error::{Error, Result};
use crate::models::ChainSpec;
use crate::numfmt;

/// Effective potentials `V^{(k,q)}_I` for every interval with at least one
/// edge. On-site terms never change and are not stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "TableRecord", try_from = "TableRecord")]
pub struct PotentialTable {
    pub n_sites: usize,
    pub local_dim: usize,
    pub entries: BTreeMap<IntervalSupport, CMatrix>,
    pub vacuum_expectations: BTreeMap<IntervalSupport, C64>,
    pub step: StepIndex,
    pub tau: C64,
}

impl PotentialTable {
    /// Table at the initial index `(0, N)`: seeded intervals carry their
    /// seed, every other interval starts at zero.
    pub fn initial(spec: &ChainSpec, space: &LocalSpace, tau: C64) -> Self {
        let n = spec.n_sites;
        let d = spec.local_dim;
        let mut entries = BTreeMap::new();
        for edges in 1..n {
            for left in 1..=n - edges {
                let dim = d.pow(edges as u32 + 1);
                entries.insert(IntervalSupport::new(left, edges), CMatrix::zeros(dim, dim));
            }
        }
        for op in spec.initial_potentials() {
            entries.insert(op.support, op.matrix);
        }
        let mut table = PotentialTable {
            n_sites: n,
            local_dim: d,
            entries,
            vacuum_expectations: BTreeMap::new(),
            step: StepIndex::initial(n),
            tau,
        };
        let supports: Vec<_> = table.entries.keys().copied().collect();
        for iv in supports {
            table.refresh_expectation(iv, space);
        }
        table
    }

    pub fn get(&self, interval: &IntervalSupport) -> Option<&CMatrix> {
        self.entries.get(interval)
    }

    pub fn operator(&self, interval: &IntervalSupport) -> Option<LocalOperator> {
        self.entries.get(interval).map(|m| LocalOperator {
            support: *interval,
            matrix: m.clone(),
        })
    }

    pub fn expectation(&self, interval: &IntervalSupport) -> C64 {
        self.vacuum_expectations.get(interval).copied().unwrap_or_default()
    }

    pub(crate) fn refresh_expectation(&mut self, interval: IntervalSupport, space: &LocalSpace) {
        let value = match self.entries.get(&interval) {
            Some(m) => space.vacuum_expectation(&LocalOperator {
                support: interval,
                matrix: m.clone(),
            }),
            None => C64::default(),
        };
        self.vacuum_expectations.insert(interval, value);
    }

    /// `τ Σ_I <V_I>` over every stored interval.
    pub fn vacuum_energy(&self) -> C64 {
        self.tau * self.vacuum_expectations.values().fold(C64::default(), |acc, v| acc + v)
    }

    pub fn to_json(&self) -> Result<String> {
        numfmt::to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        numfmt::from_json(text)
    }
}

/// One interval's matrix and cached vacuum expectation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntervalValue {
    pub left: usize,
    pub edges: usize,
    #[serde(with = "numfmt::complex")]
    pub expectation: C64,
    #[serde(with = "numfmt::cmatrix")]
    pub matrix: CMatrix,
}

#[derive(Serialize, Deserialize)]
struct TableRecord {
    n_sites: usize,
    local_dim: usize,
    step: StepIndex,
    #[serde(with = "numfmt::complex")]
    tau: C64,
    entries: Vec<IntervalValue>,
}

impl From<PotentialTable> for TableRecord {
    fn from(t: PotentialTable) -> Self {
        let entries = t
            .entries
            .iter()
            .map(|(iv, m)| IntervalValue {
                left: iv.left,
                edges: iv.edges,
                expectation: t.expectation(iv),
                matrix: m.clone(),
            })
            .collect();
        TableRecord {
            n_sites: t.n_sites,
            local_dim: t.local_dim,
            step: t.step,
            tau: t.tau,
            entries,
        }
    }
}

impl TryFrom<TableRecord> for PotentialTable {
    type Error = Error;

    fn try_from(r: TableRecord) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut vacuum_expectations = BTreeMap::new();
        for e in r.entries {
            let iv = IntervalSupport::new(e.left, e.edges);
            iv.check_fits(r.n_sites)?;
            let dim = iv.dim(r.local_dim);
            if e.matrix.nrows() != dim || e.matrix.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: e.matrix.nrows(),
                });
            }
            vacuum_expectations.insert(iv, e.expectation);
            entries.insert(iv, e.matrix);
        }
        Ok(PotentialTable {
            n_sites: r.n_sites,
            local_dim: r.local_dim,
            entries,
            vacuum_expectations,
            step: r.step,
            tau: r.tau,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_spin_model;

    #[test]
    fn initial_table_layout() {
        let spec = build_spin_model(2, 4, 1);
        let space = spec.local_space().unwrap();
        let table = PotentialTable::initial(&spec, &space, C64::new(0.02, 0.0));
        assert_eq!(table.entries.len(), 6);
        assert!(table.entries.keys().all(|iv| iv.edges >= 1));
        assert_eq!(table.get(&IntervalSupport::new(2, 1)), spec.seed(1));
        assert_eq!(table.get(&IntervalSupport::new(1, 2)).unwrap().norm(), 0.0);
        assert_eq!(table.step, StepIndex::initial(4));
        let e = table.expectation(&IntervalSupport::new(1, 1));
        assert_eq!(e, spec.seed(1).unwrap()[(0, 0)]);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let spec = build_spin_model(3, 3, 8);
        let space = spec.local_space().unwrap();
        let table = PotentialTable::initial(&spec, &space, C64::new(0.01, -0.02));
        let back = PotentialTable::from_json(&table.to_json().unwrap()).unwrap();
        assert_eq!(back, table);
    }
}
