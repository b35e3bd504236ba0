//! Small dense linear-algebra helpers shared by the modules.

use alloc::vec::Vec;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::rng::Rng;
use crate::C64;

/// Dot product with eight interleaved partial sums (fixed order, so results
/// are reproducible; the split lets the compiler vectorize).
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (ca, cb) = (a[..n].chunks_exact(8), b[..n].chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    let mut acc = [0.0f64; 8];
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

pub fn norm(a: &[f64]) -> f64 {
    num_traits::Float::sqrt(dot(a, a))
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(a: &mut [f64], s: f64) {
    for x in a {
        *x *= s;
    }
}

pub fn cnorm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// ⟨a|b⟩ with the first argument conjugated.
pub fn cdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn gaussian(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn complex_gaussian(rng: &mut Rng) -> C64 {
    C64::new(gaussian(rng), gaussian(rng))
}

pub fn complex_gaussian_vec(len: usize, rng: &mut Rng) -> Vec<C64> {
    (0..len).map(|_| complex_gaussian(rng)).collect()
}

/// Eigen-decomposition of a real symmetric matrix given row-major.
/// Returns ascending eigenvalues and the eigenvectors as columns of a
/// row-major `n × n` buffer.
pub fn sym_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let m = DMatrix::from_row_slice(n, n, a);
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = alloc::vec![0.0; n * n];
    for (col, &i) in order.iter().enumerate() {
        for r in 0..n {
            vecs[r * n + col] = eig.eigenvectors[(r, i)];
        }
    }
    (vals, vecs)
}

/// `c = alpha·op(a)·op(b) + beta·c` on row/column-strided f64 buffers.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    beta: f64,
    c: &mut [f64],
    rsc: isize,
    csc: isize,
) {
    if m == 0 || n == 0 {
        return;
    }
    let span = |rows: usize, cols: usize, rs: isize, cs: isize| {
        if rows == 0 || cols == 0 {
            0
        } else {
            ((rows - 1) as isize * rs + (cols - 1) as isize * cs) as usize + 1
        }
    };
    assert!(a.len() >= span(m, k, rsa, csa));
    assert!(b.len() >= span(k, n, rsb, csb));
    assert!(c.len() >= span(m, n, rsc, csc));
    // SAFETY: bounds checked above; strides are non-negative by construction
    // at every call site and the output does not alias the inputs.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            rsc,
            csc,
        );
    }
}
