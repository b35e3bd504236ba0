//! Exact local Pauli expectations.

use alloc::vec::Vec;

use super::pauli::Pauli;
use super::state::StateVector;

/// ⟨ψ|P_i Q_j|ψ⟩ for every (site pair, Pauli pair) combination, pairs outer.
pub fn exact_two_site_paulis(state: &StateVector, site_pairs: &[(usize, usize)], pauli_pairs: &[(Pauli, Pauli)]) -> Vec<f64> {
    let mut out = Vec::with_capacity(site_pairs.len() * pauli_pairs.len());
    for &(i, j) in site_pairs {
        for &(p, q) in pauli_pairs {
            let mut support = Vec::with_capacity(2);
            if p != Pauli::I {
                support.push((i, p));
            }
            if q != Pauli::I {
                support.push((j, q));
            }
            let v = state.expectation(&support);
            debug_assert!(v.im.abs() < 1e-10 * v.norm().max(1.0));
            out.push(v.re);
        }
    }
    out
}
