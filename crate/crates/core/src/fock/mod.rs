//! Sparse Fock-space engine over a small set of bosonic modes.
//!
//! Pure states are sparse maps from occupation vectors to amplitudes with a
//! per-mode cutoff. Mixed states are kept as weighted ensembles of pure
//! branches; loss channels split branches instead of building density
//! matrices.

mod dark;
mod ensemble;
mod mode;
mod state;

pub use dark::{dark_state_residual, sector_hamiltonian, sector_spectrum};
pub use ensemble::{MeasurementOutcome, WeightedEnsemble};
pub use mode::{Arm, Level, ModeId, Polarization, Registry};
pub use state::{unitarity_deviation, PureState};

use thiserror::Error;

/// Default per-mode occupation cutoff.
pub const DEFAULT_CUTOFF: u8 = 2;
/// Amplitudes below this magnitude are dropped.
pub const AMPLITUDE_EPS: f64 = 1e-14;
/// Ensemble branches below this weight are dropped.
pub const WEIGHT_EPS: f64 = 1e-12;
/// Tolerance for unitarity and normalization checks.
pub const UNITARITY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("mode registry is empty")]
    EmptyRegistry,
    #[error("mode {0} appears twice in the registry")]
    DuplicateMode(ModeId),
    #[error("mode {0} is not registered")]
    UnknownMode(ModeId),
    #[error("occupation of {mode} would exceed the cutoff {cutoff}")]
    CutoffExceeded { mode: ModeId, cutoff: u8 },
    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NonUnitary { deviation: f64 },
    #[error("matrix is {rows}x{cols} but {modes} modes were given")]
    DimensionMismatch { rows: usize, cols: usize, modes: usize },
    #[error("linear optics cannot act on ensemble mode {0}")]
    NotOptical(ModeId),
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("registries differ: [{0}] vs [{1}]")]
    RegistryMismatch(Registry, Registry),
    #[error("ensemble has no branches")]
    EmptyEnsemble,
    #[error("invalid branch weight {0}")]
    InvalidWeight(f64),
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("dark-state check needs 1..=4 atoms, got {0}")]
    InvalidAtomCount(usize),
    #[error("coupling and Rabi frequency are both zero")]
    DegenerateCoupling,
}
