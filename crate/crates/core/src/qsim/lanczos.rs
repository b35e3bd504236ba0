//! Lowest eigenpairs of real-symmetric Pauli Hamiltonians.
//!
//! Block Lanczos with full reorthogonalization, thick restarts and locking.
//! Each cycle grows a block Krylov basis orthogonal to the locked vectors,
//! performs Rayleigh–Ritz, locks converged low Ritz pairs in ascending order
//! and restarts from the lowest unconverged Ritz vectors plus their residual
//! block. Blocks resolve near-degenerate clusters; before stopping, a fresh
//! random block is injected to catch missed copies of degenerate levels.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::pauli::PauliTermSum;
use super::state::StateVector;
use super::QsimError;
use crate::linalg::{axpy, dot, gaussian, norm, scale, sym_eigen};
use crate::rng::{self, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenPairs {
    pub n: usize,
    pub energies: Vec<f64>,
    /// Real eigenvectors, each of length 2^n.
    pub vectors: Vec<Vec<f64>>,
}

impl EigenPairs {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn state(&self, i: usize) -> StateVector {
        StateVector {
            n: self.n,
            amplitudes: self.vectors[i].iter().map(|&x| crate::C64::new(x, 0.0)).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LanczosOptions {
    pub tol: f64,
    pub seed: u64,
    /// Block size.
    pub block: usize,
    /// Matvec budget; `None` means 50·m·√(2^n).
    pub max_matvecs: Option<usize>,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { tol: 1e-10, seed: 0x1a2c_0e5d, block: 4, max_matvecs: None }
    }
}

/// The `m` smallest eigenpairs, each with ‖Hφ − Eφ‖ ≤ tol·max(1, |E|).
pub fn lowest_eigenpairs(h: &PauliTermSum, m: usize, tol: f64) -> Result<EigenPairs, QsimError> {
    lowest_eigenpairs_with(h, m, &LanczosOptions { tol, ..Default::default() })
}

/// Orthogonalize each vector of `block` against `fixed` and the vectors kept
/// before it; drop vectors that lose almost all their norm.
fn orthonormalize_block(block: Vec<Vec<f64>>, fixed: &[&[Vec<f64>]]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(block.len());
    for mut v in block {
        let n0 = norm(&v);
        if n0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for set in fixed {
                for q in set.iter() {
                    let c = dot(q, &v);
                    axpy(-c, q, &mut v);
                }
            }
            for q in &out {
                let c = dot(q, &v);
                axpy(-c, q, &mut v);
            }
        }
        let nv = norm(&v);
        if nv > 1e-10 * n0 {
            scale(&mut v, 1.0 / nv);
            out.push(v);
        }
    }
    out
}

fn random_block(dim: usize, b: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..b).map(|_| (0..dim).map(|_| gaussian(rng)).collect()).collect()
}

pub fn lowest_eigenpairs_with(h: &PauliTermSum, m: usize, opts: &LanczosOptions) -> Result<EigenPairs, QsimError> {
    if !(opts.tol > 0.0) {
        return Err(QsimError::InvalidInput("tolerance must be positive"));
    }
    let op = h.compile_real()?;
    let dim = op.dim;
    if m > dim {
        return Err(QsimError::InvalidInput("more eigenpairs requested than the dimension"));
    }
    if m == 0 {
        return Ok(EigenPairs { n: h.n, energies: Vec::new(), vectors: Vec::new() });
    }
    let budget = opts
        .max_matvecs
        .unwrap_or_else(|| (50.0 * m as f64 * (dim as f64).sqrt()).ceil() as usize)
        .max(1);
    let b = opts.block.clamp(1, dim);
    let accept = |e: f64| opts.tol * e.abs().max(1.0);
    let mut rng = rng::from_seed(opts.seed);
    let mut locked: Vec<Vec<f64>> = Vec::new();
    let mut energies: Vec<f64> = Vec::new();
    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut hq: Vec<Vec<f64>> = Vec::new();
    let mut next = random_block(dim, b, &mut rng);
    let mut matvecs = 0usize;
    let mut best_residual = f64::INFINITY;
    let mut verified_level: Option<f64> = None;

    loop {
        if locked.len() == dim {
            break;
        }
        let want = m.saturating_sub(locked.len()).max(1);
        let kmax = (dim - locked.len()).min((3 * want + 2 * b).max(48));

        // Grow the block Krylov basis.
        loop {
            let mut r = orthonormalize_block(core::mem::take(&mut next), &[&locked, &q]);
            if r.is_empty() {
                if locked.len() + q.len() >= dim {
                    break;
                }
                r = orthonormalize_block(random_block(dim, b, &mut rng), &[&locked, &q]);
                if r.is_empty() {
                    break;
                }
            }
            r.truncate(kmax.saturating_sub(q.len()));
            if r.is_empty() {
                break;
            }
            let start = hq.len();
            for v in r {
                let mut w = alloc::vec![0.0; dim];
                op.matvec(&v, &mut w);
                matvecs += 1;
                q.push(v);
                hq.push(w);
            }
            if q.len() >= kmax || locked.len() + q.len() >= dim {
                break;
            }
            next = hq[start..].to_vec();
        }

        // Rayleigh–Ritz on the current basis.
        let k = q.len();
        let mut t = alloc::vec![0.0; k * k];
        for i in 0..k {
            for j in i..k {
                let v = 0.5 * (dot(&q[i], &hq[j]) + dot(&q[j], &hq[i]));
                t[i * k + j] = v;
                t[j * k + i] = v;
            }
        }
        let (theta, y) = sym_eigen(&t, k);
        let combine = |basis: &[Vec<f64>], i: usize| -> Vec<f64> {
            let mut v = alloc::vec![0.0; dim];
            for (r, bv) in basis.iter().enumerate() {
                axpy(y[r * k + i], bv, &mut v);
            }
            v
        };
        let mut first_unlocked = k;
        let mut residual_block: Vec<Vec<f64>> = Vec::new();
        let mut kept: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        let keep_max = |locked_now: usize| {
            let want = m.saturating_sub(locked_now).max(1);
            let kmax = (dim - locked_now).min((3 * want + 2 * b).max(48));
            kmax.saturating_sub(b).max(1).min(want + 2 * b)
        };
        for i in 0..k {
            let x = combine(&q, i);
            let hx = combine(&hq, i);
            let mut res = hx.clone();
            axpy(-theta[i], &x, &mut res);
            let r = norm(&res);
            best_residual = best_residual.min(r);
            if first_unlocked == k && r <= accept(theta[i]) {
                locked.push(x);
                energies.push(theta[i]);
                continue;
            }
            if first_unlocked == k {
                first_unlocked = i;
            }
            if residual_block.len() < b {
                residual_block.push(res);
            }
            kept.push((x, hx));
            if kept.len() >= keep_max(locked.len()) {
                break;
            }
        }

        if locked.len() >= m {
            let mut sorted = energies.clone();
            sorted.sort_by(f64::total_cmp);
            let em = sorted[m - 1];
            let lowest_open = if first_unlocked < k { theta[first_unlocked] } else { f64::INFINITY };
            let complete = lowest_open >= em - 10.0 * accept(em);
            if complete && verified_level == Some(em) {
                break;
            }
            if complete {
                // one more cycle from a fresh random block must confirm
                verified_level = Some(em);
                residual_block = random_block(dim, b, &mut rng);
            } else {
                verified_level = None;
            }
        }
        if matvecs >= budget {
            return Err(QsimError::NotConverged { best_residual, matvecs });
        }
        q = kept.iter().map(|(x, _)| x.clone()).collect();
        hq = kept.into_iter().map(|(_, hx)| hx).collect();
        next = residual_block;
    }

    if locked.len() < m {
        return Err(QsimError::NotConverged { best_residual, matvecs });
    }
    let mut order: Vec<usize> = (0..locked.len()).collect();
    order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]));
    order.truncate(m);
    Ok(EigenPairs {
        n: h.n,
        energies: order.iter().map(|&i| energies[i]).collect(),
        vectors: order.iter().map(|&i| locked[i].clone()).collect(),
    })
}

/// ‖Hφ_i − E_iφ_i‖ for every pair.
pub fn residuals(h: &PauliTermSum, eigs: &EigenPairs) -> Result<Vec<f64>, QsimError> {
    let op = h.compile_real()?;
    let mut tmp = alloc::vec![0.0; op.dim];
    Ok(eigs
        .vectors
        .iter()
        .zip(&eigs.energies)
        .map(|(v, &e)| {
            op.matvec(v, &mut tmp);
            axpy(-e, v, &mut tmp);
            norm(&tmp)
        })
        .collect())
}
