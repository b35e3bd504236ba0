#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use shadowda_core::qsim::{Pauli, PauliTermSum, StateVector};

pub fn pauli2(p: Pauli) -> DMatrix<C64> {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match p {
        Pauli::I => DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        Pauli::X => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        Pauli::Y => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        Pauli::Z => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    }
}

/// Dense Pauli string via Kronecker products; qubit 0 is the least
/// significant tensor factor.
pub fn dense_string(n: usize, support: &[(usize, Pauli)]) -> DMatrix<C64> {
    let mut m = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
    for q in (0..n).rev() {
        let p = support.iter().find(|(s, _)| *s == q).map(|(_, p)| *p).unwrap_or(Pauli::I);
        m = m.kronecker(&pauli2(p));
    }
    m
}

pub fn dense_hamiltonian(h: &PauliTermSum) -> DMatrix<C64> {
    let d = 1usize << h.n;
    let mut m = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
    for t in &h.terms {
        m += dense_string(h.n, &t.support) * C64::new(t.coeff, 0.0);
    }
    m
}

pub fn dense_real_spectrum(h: &PauliTermSum) -> Vec<f64> {
    let m = dense_hamiltonian(h);
    assert!(m.iter().all(|z| z.im == 0.0));
    let r = m.map(|z| z.re);
    let mut e: Vec<f64> = SymmetricEigen::new(r).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

pub fn dense_expectation(s: &StateVector, op: &DMatrix<C64>) -> C64 {
    let v = nalgebra::DVector::from_vec(s.amplitudes.clone());
    (v.adjoint() * op * &v)[(0, 0)]
}

pub fn ghz(n: usize) -> StateVector {
    let d = 1usize << n;
    let mut a = vec![C64::new(0.0, 0.0); d];
    a[0] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    a[d - 1] = a[0];
    StateVector::new(n, a).unwrap()
}

pub fn random_state(n: usize, seed: u64) -> StateVector {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<C64> = (0..1usize << n)
        .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
        .collect();
    StateVector::normalized(n, a).unwrap()
}

/// Von Neumann entropy (nats) of the reduced state on `sites`, via the
/// singular values of the reshaped amplitude matrix.
pub fn cut_entropy(s: &StateVector, sites: &[usize]) -> f64 {
    let n = s.n;
    let rest: Vec<usize> = (0..n).filter(|q| !sites.contains(q)).collect();
    let (da, db) = (1usize << sites.len(), 1usize << rest.len());
    let mut m = DMatrix::from_element(da, db, C64::new(0.0, 0.0));
    for b in 0..(1usize << n) {
        let ia: usize = sites.iter().enumerate().map(|(j, &q)| ((b >> q) & 1) << j).sum();
        let ib: usize = rest.iter().enumerate().map(|(j, &q)| ((b >> q) & 1) << j).sum();
        m[(ia, ib)] = s.amplitudes[b];
    }
    let sv = m.svd(false, false).singular_values;
    sv.iter()
        .map(|&x| x * x)
        .filter(|&p| p > 1e-300)
        .map(|p| -p * p.ln())
        .sum()
}

pub fn schmidt_rank(s: &StateVector, sites: &[usize], tol: f64) -> usize {
    let n = s.n;
    let rest: Vec<usize> = (0..n).filter(|q| !sites.contains(q)).collect();
    let (da, db) = (1usize << sites.len(), 1usize << rest.len());
    let mut m = DMatrix::from_element(da, db, C64::new(0.0, 0.0));
    for b in 0..(1usize << n) {
        let ia: usize = sites.iter().enumerate().map(|(j, &q)| ((b >> q) & 1) << j).sum();
        let ib: usize = rest.iter().enumerate().map(|(j, &q)| ((b >> q) & 1) << j).sum();
        m[(ia, ib)] = s.amplitudes[b];
    }
    m.svd(false, false).singular_values.iter().filter(|&&x| x > tol).count()
}

/// Eigenvector of the basis-`code` Pauli (X=0, Y=1, Z=2) with eigenvalue
/// (−1)^outcome, written out by hand.
pub fn snapshot_ket(code: u8, outcome: u8) -> [C64; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let sign = if outcome == 0 { 1.0 } else { -1.0 };
    match code {
        0 => [C64::new(s, 0.0), C64::new(sign * s, 0.0)],
        1 => [C64::new(s, 0.0), C64::new(0.0, sign * s)],
        _ => {
            if outcome == 0 {
                [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
            } else {
                [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]
            }
        }
    }
}

/// 3|s⟩⟨s| − I as a dense 2×2 matrix.
pub fn snapshot_operator(code: u8, outcome: u8) -> DMatrix<C64> {
    let k = snapshot_ket(code, outcome);
    let v = nalgebra::DVector::from_column_slice(&k);
    &v * v.adjoint() * C64::new(3.0, 0.0) - DMatrix::identity(2, 2)
}

pub fn product_plus(n: usize) -> StateVector {
    let d = 1usize << n;
    let a = (d as f64).sqrt().recip();
    StateVector::new(n, vec![C64::new(a, 0.0); d]).unwrap()
}
