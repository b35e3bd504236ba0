//! Exact simulation of the spin-chain benchmarks: Hamiltonians, low-energy
//! eigenpairs, raw and filtered imperfect target states, exact observables
//! and noise trajectories.

mod hamiltonian;
mod lanczos;
mod noise;
mod observables;
mod pauli;
mod qetu;
mod simplex;
mod state;
mod subspace;

pub use hamiltonian::{build_hamiltonian, emax_bound, SpinModel};
pub use lanczos::{lowest_eigenpairs, lowest_eigenpairs_with, residuals, EigenPairs, LanczosOptions};
pub use noise::{
    depolarize_trajectory, depolarize_trajectory_with, sample_pauli_error, DepolarizingConvention, NoiseSpec,
};
pub use observables::exact_two_site_paulis;
pub use pauli::{Pauli, PauliMasks, PauliTerm, PauliTermSum, RealOperator};
pub use qetu::{apply_qetu, design_qetu_filter, even_chebyshev, qetu_coefficients, QetuDesign, QetuFilter, FILTER_BOUND};
pub use state::{pauli_matrix, StateVector};
pub use subspace::{
    eigen_coefficients, overlap_with_subspace, resolve_subspace, sample_raw_state, synthesize, SubspaceRule,
    SubspaceSpec,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QsimError {
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("Hamiltonian has a non-real matrix (odd number of Y factors)")]
    NotReal,
    #[error("state norm {0} differs from 1")]
    NotNormalized(f64),
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("eigensolver did not converge after {matvecs} matvecs (best residual {best_residual:e})")]
    NotConverged { best_residual: f64, matvecs: usize },
    #[error("need {needed} eigenpairs, have {have}")]
    InsufficientEigenpairs { needed: usize, have: usize },
    #[error("subspace complement is empty within the computed span")]
    EmptyComplement,
    #[error("infeasible filter window for gap estimate {gap_est}")]
    InfeasibleWindow { gap_est: f64 },
    #[error("filter design failed: {0}")]
    FilterDesign(&'static str),
    #[error("state is not in the span of the eigenpairs (residual {0:e})")]
    NotInSpan(f64),
    #[error("filter annihilated the state")]
    FilterAnnihilated,
}
