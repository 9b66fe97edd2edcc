//! Block-diagonalization of gapped quantum chains with a complex coupling,
//! by successive Lie-Schwinger conjugations on growing intervals.

pub mod algebra;
pub mod cli;
pub mod engine;
pub mod error;
pub mod models;
pub mod numfmt;
pub mod verify;

pub use engine::{run_blockdiag, BlockDiagonalizer, EngineConfig, RunReport, StepIndex};
pub use error::{Error, Result};
pub use models::{build_anharmonic_model, build_spin_model, ChainSpec};
