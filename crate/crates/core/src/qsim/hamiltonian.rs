//! Cluster and ANNNI chain Hamiltonians with open boundaries.

use alloc::vec;
use serde::{Deserialize, Serialize};

use super::pauli::{Pauli, PauliTermSum};
use super::QsimError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinModel {
    /// H = Σ_j (J Z_j − h1 X_j X_{j+1} − h2 X_{j−1} Z_j X_{j+1}), J = 1,
    /// params = (h1, h2).
    Cluster,
    /// H = −J1 Σ X_j X_{j+1} − J2 Σ X_j X_{j+2} − B Σ Z_j with J1 = 1,
    /// J2 = −κ, B = h; params = (κ, h).
    Annni,
}

/// Build the model Hamiltonian. Terms touching sites outside the chain are
/// dropped.
pub fn build_hamiltonian(model: SpinModel, n: usize, params: (f64, f64)) -> Result<PauliTermSum, QsimError> {
    if n < 3 {
        return Err(QsimError::InvalidInput("chain needs at least 3 sites"));
    }
    if !params.0.is_finite() || !params.1.is_finite() {
        return Err(QsimError::InvalidInput("non-finite Hamiltonian parameters"));
    }
    let mut h = PauliTermSum::new(n);
    match model {
        SpinModel::Cluster => {
            let (h1, h2) = params;
            for j in 0..n {
                h.push(1.0, vec![(j, Pauli::Z)])?;
            }
            if h1 != 0.0 {
                for j in 0..n - 1 {
                    h.push(-h1, vec![(j, Pauli::X), (j + 1, Pauli::X)])?;
                }
            }
            if h2 != 0.0 {
                for j in 1..n - 1 {
                    h.push(-h2, vec![(j - 1, Pauli::X), (j, Pauli::Z), (j + 1, Pauli::X)])?;
                }
            }
        }
        SpinModel::Annni => {
            let (kappa, b) = params;
            let j2 = -kappa;
            for j in 0..n - 1 {
                h.push(-1.0, vec![(j, Pauli::X), (j + 1, Pauli::X)])?;
            }
            if j2 != 0.0 {
                for j in 0..n - 2 {
                    h.push(-j2, vec![(j, Pauli::X), (j + 2, Pauli::X)])?;
                }
            }
            if b != 0.0 {
                for j in 0..n {
                    h.push(-b, vec![(j, Pauli::Z)])?;
                }
            }
        }
    }
    Ok(h)
}

/// Trivial upper bound on ‖H‖ used to rescale the spectrum before filtering.
pub fn emax_bound(model: SpinModel, n: usize, params: (f64, f64)) -> f64 {
    let n = n as f64;
    match model {
        SpinModel::Cluster => n + (n - 1.0) * params.0.abs() + (n - 2.0) * params.1.abs(),
        SpinModel::Annni => (n - 1.0) * (1.0 + params.0.abs()) + n * params.1.abs(),
    }
}
