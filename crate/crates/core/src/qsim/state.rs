//! Pure states as dense amplitude vectors.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::pauli::{Pauli, PauliMasks};
use super::QsimError;
use crate::linalg::{cdot, cnorm_sqr};
use crate::C64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub n: usize,
    pub amplitudes: Vec<C64>,
}

impl StateVector {
    /// Wrap amplitudes, checking length and unit norm (1e-10).
    pub fn new(n: usize, amplitudes: Vec<C64>) -> Result<Self, QsimError> {
        if amplitudes.len() != 1usize << n {
            return Err(QsimError::InvalidInput("amplitude vector length is not 2^n"));
        }
        let nrm = cnorm_sqr(&amplitudes);
        if (nrm.sqrt() - 1.0).abs() > 1e-10 {
            return Err(QsimError::NotNormalized(nrm.sqrt()));
        }
        Ok(StateVector { n, amplitudes })
    }

    /// Normalize arbitrary nonzero amplitudes.
    pub fn normalized(n: usize, mut amplitudes: Vec<C64>) -> Result<Self, QsimError> {
        let nrm = cnorm_sqr(&amplitudes).sqrt();
        if !(nrm > 1e-12) {
            return Err(QsimError::ZeroNorm);
        }
        for a in &mut amplitudes {
            *a /= nrm;
        }
        StateVector::new(n, amplitudes)
    }

    pub fn from_real(n: usize, v: &[f64]) -> Result<Self, QsimError> {
        StateVector::new(n, v.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Computational basis state |index⟩.
    pub fn basis(n: usize, index: usize) -> Self {
        let mut amplitudes = alloc::vec![C64::new(0.0, 0.0); 1usize << n];
        amplitudes[index] = C64::new(1.0, 0.0);
        StateVector { n, amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        cdot(&self.amplitudes, &other.amplitudes)
    }

    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// ⟨ψ|P|ψ⟩ for a Pauli string given as (site, letter) pairs.
    pub fn expectation(&self, support: &[(usize, Pauli)]) -> C64 {
        PauliMasks::from_support(support).expectation(&self.amplitudes)
    }

    /// Apply a single-qubit 2×2 matrix `[[a, b], [c, d]]` on `site` in place.
    pub fn apply_1q(&mut self, site: usize, m: &[[C64; 2]; 2]) {
        apply_1q(&mut self.amplitudes, site, m);
    }

    /// Reduced density matrix on the listed sites, row-major `2^k × 2^k`,
    /// with `sites[j]` as bit `j` of the local index.
    pub fn reduced_density_matrix(&self, sites: &[usize]) -> Vec<C64> {
        let k = sites.len();
        let dk = 1usize << k;
        let env: Vec<usize> = (0..self.n).filter(|q| !sites.contains(q)).collect();
        let scatter = |x: usize, pos: &[usize]| -> usize {
            pos.iter().enumerate().map(|(j, &s)| ((x >> j) & 1) << s).sum()
        };
        let offs: Vec<usize> = (0..dk).map(|i| scatter(i, sites)).collect();
        let mut rho = alloc::vec![C64::new(0.0, 0.0); dk * dk];
        let mut local = alloc::vec![C64::new(0.0, 0.0); dk];
        for e in 0..(1usize << env.len()) {
            let base = scatter(e, &env);
            for (l, &o) in local.iter_mut().zip(&offs) {
                *l = self.amplitudes[base | o];
            }
            for i in 0..dk {
                for j in 0..dk {
                    rho[i * dk + j] += local[i] * local[j].conj();
                }
            }
        }
        rho
    }
}

pub(crate) fn apply_1q(amps: &mut [C64], site: usize, m: &[[C64; 2]; 2]) {
    let bit = 1usize << site;
    for b in 0..amps.len() {
        if b & bit == 0 {
            let a0 = amps[b];
            let a1 = amps[b | bit];
            amps[b] = m[0][0] * a0 + m[0][1] * a1;
            amps[b | bit] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
}

/// Single-qubit Pauli matrices.
pub fn pauli_matrix(p: Pauli) -> [[C64; 2]; 2] {
    let o = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match p {
        Pauli::I => [[one, o], [o, one]],
        Pauli::X => [[o, one], [one, o]],
        Pauli::Y => [[o, -i], [i, o]],
        Pauli::Z => [[one, o], [o, -one]],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_checked() {
        assert!(StateVector::new(1, vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).is_err());
        assert!(StateVector::normalized(1, vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).is_ok());
        assert!(StateVector::new(2, vec![C64::new(1.0, 0.0)]).is_err());
    }

    #[test]
    fn rdm_of_bell_state_is_maximally_mixed() {
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let s = StateVector::new(
            2,
            vec![C64::new(h, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(h, 0.0)],
        )
        .unwrap();
        let r = s.reduced_density_matrix(&[1]);
        assert!((r[0].re - 0.5).abs() < 1e-15 && (r[3].re - 0.5).abs() < 1e-15);
        assert!(r[1].norm() < 1e-15);
        let full = s.reduced_density_matrix(&[0, 1]);
        assert!((full[3].re - 0.5).abs() < 1e-15);
    }
}
