//! Pauli strings and term sums, applied to state vectors term by term.
//!
//! Qubit `i` is bit `i` of the computational-basis index.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::QsimError;
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    /// Measurement-basis code (X=0, Y=1, Z=2); `None` for the identity.
    pub fn basis_code(self) -> Option<u8> {
        match self {
            Pauli::I => None,
            Pauli::X => Some(0),
            Pauli::Y => Some(1),
            Pauli::Z => Some(2),
        }
    }

    pub fn from_basis_code(c: u8) -> Option<Pauli> {
        match c {
            0 => Some(Pauli::X),
            1 => Some(Pauli::Y),
            2 => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// Whether the two single-qubit Paulis anticommute.
    pub fn anticommutes(self, other: Pauli) -> bool {
        self != Pauli::I && other != Pauli::I && self != other
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coeff: f64,
    pub support: Vec<(usize, Pauli)>,
}

/// Bit masks of a Pauli string: `P|b⟩ = i^ny (−1)^{|b ∧ z|} |b ⊕ x⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PauliMasks {
    pub x: u64,
    pub z: u64,
    pub ny: u32,
}

impl PauliMasks {
    pub fn from_support(support: &[(usize, Pauli)]) -> Self {
        let (mut x, mut z, mut ny) = (0u64, 0u64, 0u32);
        for &(site, p) in support {
            let bit = 1u64 << site;
            match p {
                Pauli::I => {}
                Pauli::X => x |= bit,
                Pauli::Z => z |= bit,
                Pauli::Y => {
                    x |= bit;
                    z |= bit;
                    ny += 1;
                }
            }
        }
        PauliMasks { x, z, ny }
    }

    /// The phase i^ny.
    pub fn phase(&self) -> C64 {
        match self.ny % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        }
    }

    /// `out += coeff · P · v`.
    pub fn apply_add(&self, coeff: C64, v: &[C64], out: &mut [C64]) {
        let c = coeff * self.phase();
        for (b, &a) in v.iter().enumerate() {
            let s = if (b as u64 & self.z).count_ones() & 1 == 1 { -c } else { c };
            out[b ^ self.x as usize] += s * a;
        }
    }

    /// ⟨v|P|v⟩.
    pub fn expectation(&self, v: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (b, &a) in v.iter().enumerate() {
            let t = v[b ^ self.x as usize].conj() * a;
            if (b as u64 & self.z).count_ones() & 1 == 1 {
                acc -= t;
            } else {
                acc += t;
            }
        }
        acc * self.phase()
    }
}

/// A Hamiltonian as a real-weighted sum of Pauli strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliTermSum {
    pub n: usize,
    pub terms: Vec<PauliTerm>,
}

impl PauliTermSum {
    pub fn new(n: usize) -> Self {
        PauliTermSum { n, terms: Vec::new() }
    }

    pub fn push(&mut self, coeff: f64, support: Vec<(usize, Pauli)>) -> Result<(), QsimError> {
        if !coeff.is_finite() {
            return Err(QsimError::InvalidInput("non-finite coefficient"));
        }
        for (k, &(site, p)) in support.iter().enumerate() {
            if site >= self.n {
                return Err(QsimError::InvalidInput("site index out of range"));
            }
            if p == Pauli::I {
                return Err(QsimError::InvalidInput("identity letter in term support"));
            }
            if support[..k].iter().any(|&(s, _)| s == site) {
                return Err(QsimError::InvalidInput("duplicate site in term"));
            }
        }
        self.terms.push(PauliTerm { coeff, support });
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1usize << self.n
    }

    /// Σ |coeff|, an upper bound on the operator norm.
    pub fn norm_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.abs()).sum()
    }

    /// Apply to a complex vector term by term.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = alloc::vec![C64::new(0.0, 0.0); v.len()];
        for t in &self.terms {
            PauliMasks::from_support(&t.support).apply_add(C64::new(t.coeff, 0.0), v, &mut out);
        }
        out
    }

    pub fn compile_real(&self) -> Result<RealOperator, QsimError> {
        RealOperator::new(self)
    }
}

/// A Pauli term sum with a real matrix in the computational basis, compiled
/// for fast real matrix-vector products. Pure-Z terms are folded into a
/// diagonal.
#[derive(Clone, Debug)]
pub struct RealOperator {
    pub dim: usize,
    diag: Vec<f64>,
    offdiag: Vec<(f64, usize, u64)>,
    pub norm_bound: f64,
}

impl RealOperator {
    pub fn new(h: &PauliTermSum) -> Result<Self, QsimError> {
        if h.n > 30 {
            return Err(QsimError::InvalidInput("too many qubits for a state vector"));
        }
        let dim = h.dim();
        let mut diag = alloc::vec![0.0; dim];
        let mut offdiag = Vec::new();
        for t in &h.terms {
            let m = PauliMasks::from_support(&t.support);
            if m.ny % 2 == 1 {
                return Err(QsimError::NotReal);
            }
            let c = if m.ny % 4 == 2 { -t.coeff } else { t.coeff };
            if m.x == 0 {
                for (b, d) in diag.iter_mut().enumerate() {
                    if (b as u64 & m.z).count_ones() & 1 == 1 {
                        *d -= c;
                    } else {
                        *d += c;
                    }
                }
            } else {
                offdiag.push((c, m.x as usize, m.z));
            }
        }
        Ok(RealOperator { dim, diag, offdiag, norm_bound: h.norm_bound() })
    }

    /// `out = H v`.
    pub fn matvec(&self, v: &[f64], out: &mut [f64]) {
        for ((o, d), x) in out.iter_mut().zip(&self.diag).zip(v) {
            *o = d * x;
        }
        // Signs factor over the low byte and the remaining bits of b, so the
        // inner loop reads a 256-entry table instead of counting bits.
        let block = self.dim.min(256);
        let mut low = [0.0f64; 256];
        for &(c, x, z) in &self.offdiag {
            for (j, l) in low.iter_mut().enumerate().take(block) {
                *l = if (j as u64 & z).count_ones() & 1 == 1 { -c } else { c };
            }
            for base in (0..self.dim).step_by(block) {
                let hi = if (base as u64 & z).count_ones() & 1 == 1 { -1.0 } else { 1.0 };
                let tx = (base ^ x) & !(block - 1);
                let xl = x & (block - 1);
                let vb = &v[base..base + block];
                let ob = &mut out[tx..tx + block];
                for j in 0..block {
                    ob[j ^ xl] += hi * low[j] * vb[j];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn y_phase_convention() {
        // Y|0⟩ = i|1⟩, Y|1⟩ = −i|0⟩
        let m = PauliMasks::from_support(&[(0, Pauli::Y)]);
        let mut out = [C64::new(0.0, 0.0); 2];
        m.apply_add(C64::new(1.0, 0.0), &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], &mut out);
        assert_eq!(out[1], C64::new(0.0, 1.0));
        let mut out = [C64::new(0.0, 0.0); 2];
        m.apply_add(C64::new(1.0, 0.0), &[C64::new(0.0, 0.0), C64::new(1.0, 0.0)], &mut out);
        assert_eq!(out[0], C64::new(0.0, -1.0));
    }

    #[test]
    fn rejects_bad_terms() {
        let mut h = PauliTermSum::new(2);
        assert!(h.push(1.0, vec![(2, Pauli::X)]).is_err());
        assert!(h.push(1.0, vec![(0, Pauli::X), (0, Pauli::Z)]).is_err());
        assert!(h.push(f64::NAN, vec![(0, Pauli::X)]).is_err());
        assert!(h.push(1.0, vec![(0, Pauli::I)]).is_err());
    }

    #[test]
    fn odd_y_count_is_not_real() {
        let mut h = PauliTermSum::new(2);
        h.push(1.0, vec![(0, Pauli::Y)]).unwrap();
        assert!(matches!(h.compile_real(), Err(QsimError::NotReal)));
        let mut h = PauliTermSum::new(2);
        h.push(1.0, vec![(0, Pauli::Y), (1, Pauli::Y)]).unwrap();
        assert!(h.compile_real().is_ok());
    }

    #[test]
    fn real_matvec_matches_complex_apply() {
        let mut h = PauliTermSum::new(3);
        h.push(0.7, vec![(0, Pauli::X), (1, Pauli::X)]).unwrap();
        h.push(-1.3, vec![(1, Pauli::Z)]).unwrap();
        h.push(0.4, vec![(0, Pauli::Y), (2, Pauli::Y)]).unwrap();
        h.push(0.2, vec![(0, Pauli::X), (1, Pauli::Z), (2, Pauli::X)]).unwrap();
        let v: Vec<f64> = (0..8).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut out = vec![0.0; 8];
        h.compile_real().unwrap().matvec(&v, &mut out);
        let vc: Vec<C64> = v.iter().map(|&x| C64::new(x, 0.0)).collect();
        let outc = h.apply(&vc);
        for (a, b) in out.iter().zip(&outc) {
            assert!((a - b.re).abs() < 1e-14 && b.im.abs() < 1e-14);
        }
    }
}
