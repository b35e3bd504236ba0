//! Hardware-type noise: single-qubit depolarizing trajectories and readout
//! bit flips.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::pauli::Pauli;
use super::state::{pauli_matrix, StateVector};
use super::QsimError;
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub p_depol: f64,
    pub p_flip: f64,
}

impl NoiseSpec {
    pub fn new(p_depol: f64, p_flip: f64) -> Result<Self, QsimError> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !ok(p_depol) || !ok(p_flip) {
            return Err(QsimError::InvalidInput("noise probabilities must lie in [0, 1]"));
        }
        Ok(NoiseSpec { p_depol, p_flip })
    }

    pub fn clean() -> Self {
        NoiseSpec { p_depol: 0.0, p_flip: 0.0 }
    }

    pub fn is_clean(&self) -> bool {
        self.p_depol == 0.0 && self.p_flip == 0.0
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec { p_depol: 0.1, p_flip: 0.01 }
    }
}

/// How `p_depol` maps to a per-qubit Pauli error probability.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepolarizingConvention {
    /// ρ → (1−p)ρ + p·I/2: a uniformly random X/Y/Z with probability 3p/4.
    #[default]
    MixingToIdentity,
    /// Each of X, Y, Z with probability p/3.
    TotalFlip,
}

/// Draw the Pauli error hitting one qubit in one trajectory.
pub fn sample_pauli_error(p: f64, convention: DepolarizingConvention, rng: &mut Rng) -> Pauli {
    let q = match convention {
        DepolarizingConvention::MixingToIdentity => 0.75 * p,
        DepolarizingConvention::TotalFlip => p,
    };
    if q > 0.0 && rng.random::<f64>() < q {
        [Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..3)]
    } else {
        Pauli::I
    }
}

pub fn depolarize_trajectory(state: &StateVector, p_depol: f64, rng: &mut Rng) -> StateVector {
    depolarize_trajectory_with(state, p_depol, DepolarizingConvention::default(), rng)
}

/// One Monte-Carlo trajectory of independent single-qubit depolarizing noise.
pub fn depolarize_trajectory_with(
    state: &StateVector,
    p_depol: f64,
    convention: DepolarizingConvention,
    rng: &mut Rng,
) -> StateVector {
    let mut out = state.clone();
    for q in 0..state.n {
        let e = sample_pauli_error(p_depol, convention, rng);
        if e != Pauli::I {
            out.apply_1q(q, &pauli_matrix(e));
        }
    }
    out
}
