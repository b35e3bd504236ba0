//! Target-only clustering baselines on shadow-kernel Gram matrices and on
//! raw features, plus evaluation-time relabeling.

mod kmeans;
mod relabel;

pub use kmeans::{kmeans_gram, kmeans_points, linear_gram, ClusterAssignment, DEFAULT_RESTARTS};
pub use relabel::{assignment_exhaustive, assignment_hungarian, f1_weight_matrix, relabel_to_truth};

use alloc::vec::Vec;
use alloc::string::String;
use serde::{Deserialize, Serialize};

use crate::exec::ParMap;
use crate::linalg::sym_eigen;
use crate::rng;
use crate::select::CandidatePredictions;
use crate::shadows::{gram_matrices, GramMatrix, IndexMode, ShadowRecord};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BaselineError {
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("zero degree in rows {0:?}")]
    ZeroDegree(Vec<usize>),
    #[error("shadow error: {0}")]
    Shadow(String),
}

fn check(k: &[f64], n: usize, c: usize) -> Result<(), BaselineError> {
    if n == 0 || k.len() != n * n {
        return Err(BaselineError::InvalidInput("gram must be a nonempty square matrix"));
    }
    if c == 0 || c > n {
        return Err(BaselineError::InvalidInput("cluster count out of range"));
    }
    let scale = k.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        for j in 0..i {
            if (k[i * n + j] - k[j * n + i]).abs() > 1e-9 * scale.max(1.0) {
                return Err(BaselineError::InvalidInput("gram must be symmetric"));
            }
        }
    }
    Ok(())
}

pub fn kernel_kmeans(gram: &GramMatrix, c: usize, seed: u64, restarts: usize) -> Result<ClusterAssignment, BaselineError> {
    check(&gram.entries, gram.size, c)?;
    Ok(kmeans_gram(&gram.entries, gram.size, c, seed, restarts))
}

/// Rows of the `c` lowest eigenvectors of I − D^{−1/2} K D^{−1/2}, each row
/// normalized to unit length. Negative affinities are shifted away first.
pub fn spectral_embedding(k: &[f64], n: usize, c: usize) -> Result<Vec<f64>, BaselineError> {
    let min = k.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = if min < 0.0 {
        log::warn!("shifting affinities by {} to make them nonnegative", -min);
        -min
    } else {
        0.0
    };
    let deg: Vec<f64> = (0..n).map(|i| k[i * n..(i + 1) * n].iter().map(|v| v + shift).sum()).collect();
    let zero: Vec<usize> = (0..n).filter(|&i| deg[i] <= 0.0).collect();
    if !zero.is_empty() {
        return Err(BaselineError::ZeroDegree(zero));
    }
    let inv: Vec<f64> = deg.iter().map(|d| 1.0 / num_traits::Float::sqrt(*d)).collect();
    let mut l = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            l[i * n + j] = if i == j { 1.0 } else { 0.0 } - inv[i] * (k[i * n + j] + shift) * inv[j];
        }
    }
    let (_, vecs) = sym_eigen(&l, n);
    let mut emb = alloc::vec![0.0; n * c];
    for i in 0..n {
        let row = &mut emb[i * c..(i + 1) * c];
        for (j, r) in row.iter_mut().enumerate() {
            *r = vecs[i * n + j];
        }
        let norm = crate::linalg::norm(row);
        if norm > 0.0 {
            crate::linalg::scale(row, 1.0 / norm);
        }
    }
    Ok(emb)
}

pub fn spectral_clustering(gram: &GramMatrix, c: usize, seed: u64, restarts: usize) -> Result<ClusterAssignment, BaselineError> {
    check(&gram.entries, gram.size, c)?;
    let emb = spectral_embedding(&gram.entries, gram.size, c)?;
    Ok(kmeans_points(&emb, gram.size, c, c, seed, restarts))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pca {
    /// Component variances, non-increasing.
    pub variances: Vec<f64>,
    /// `rows × dims` scores on the leading components.
    pub scores: Vec<f64>,
    pub dims: usize,
}

/// Principal components of row-major `rows × dim` data through the sample
/// covariance. Requests beyond the numerical rank are truncated.
pub fn pca(x: &[f64], rows: usize, dim: usize, dims: usize) -> Result<Pca, BaselineError> {
    if rows < 2 || x.len() != rows * dim || dims == 0 {
        return Err(BaselineError::InvalidInput("pca needs at least two rows and dims > 0"));
    }
    let mut mean = alloc::vec![0.0; dim];
    for r in x.chunks(dim) {
        crate::linalg::axpy(1.0 / rows as f64, r, &mut mean);
    }
    let mut xc = x.to_vec();
    for r in xc.chunks_mut(dim) {
        crate::linalg::axpy(-1.0, &mean, r);
    }
    let mut cov = alloc::vec![0.0; dim * dim];
    crate::linalg::gemm(dim, rows, dim, 1.0 / (rows - 1) as f64, &xc, 1, dim as isize, &xc, dim as isize, 1, 0.0, &mut cov, dim as isize, 1);
    let (vals, vecs) = sym_eigen(&cov, dim);
    let top = vals.last().copied().unwrap_or(0.0).max(0.0);
    let rank = vals.iter().filter(|&&v| v > 1e-12 * top.max(1e-300)).count();
    let mut d = dims.min(rows).min(dim);
    if d > rank {
        log::warn!("pca dims {d} exceed rank {rank}; truncating");
        d = rank.max(1);
    }
    let order: Vec<usize> = (0..d).map(|j| dim - 1 - j).collect();
    let variances = order.iter().map(|&j| vals[j].max(0.0)).collect();
    let mut scores = alloc::vec![0.0; rows * d];
    for i in 0..rows {
        for (a, &j) in order.iter().enumerate() {
            scores[i * d + a] = (0..dim).map(|t| xc[i * dim + t] * vecs[t * dim + j]).sum();
        }
    }
    Ok(Pca { variances, scores, dims: d })
}

pub fn pca_kmeans(features: &[Vec<f64>], dims: usize, c: usize, seed: u64, restarts: usize) -> Result<ClusterAssignment, BaselineError> {
    let dim = features.first().map_or(0, Vec::len);
    if features.iter().any(|f| f.len() != dim) || dim == 0 {
        return Err(BaselineError::InvalidInput("features must be nonempty and equal length"));
    }
    if c == 0 || c > features.len() {
        return Err(BaselineError::InvalidInput("cluster count out of range"));
    }
    let flat: Vec<f64> = features.iter().flatten().copied().collect();
    let p = pca(&flat, features.len(), dim, dims)?;
    Ok(kmeans_points(&p.scores, features.len(), p.dims, c, seed, restarts))
}

pub fn default_pca_dims(classes: usize) -> usize {
    classes * 4
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClusterMethod {
    KernelKMeans,
    Spectral,
    PcaKMeans,
}

impl ClusterMethod {
    pub const ALL: [ClusterMethod; 3] = [ClusterMethod::KernelKMeans, ClusterMethod::Spectral, ClusterMethod::PcaKMeans];

    pub fn name(self) -> &'static str {
        match self {
            ClusterMethod::KernelKMeans => "kernel-kmeans",
            ClusterMethod::Spectral => "spectral",
            ClusterMethod::PcaKMeans => "pca-kmeans",
        }
    }
}

impl core::str::FromStr for ClusterMethod {
    type Err = &'static str;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kernel-kmeans" | "kkmeans" => Ok(ClusterMethod::KernelKMeans),
            "spectral" => Ok(ClusterMethod::Spectral),
            "pca-kmeans" | "pca" => Ok(ClusterMethod::PcaKMeans),
            _ => Err("method must be kernel-kmeans, spectral or pca-kmeans"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterCandidate {
    pub method: ClusterMethod,
    pub tau: f64,
    pub gamma: f64,
    pub assignment: ClusterAssignment,
}

impl ClusterCandidate {
    pub fn predictions(&self, id: usize) -> CandidatePredictions {
        CandidatePredictions { config: id, epoch: 0, rows: self.assignment.labels.len(), classes: self.assignment.clusters, probs: self.assignment.probs() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterSettings {
    pub classes: usize,
    pub seed: u64,
    pub restarts: usize,
    pub pca_dims: usize,
    pub mode: IndexMode,
}

/// One candidate per (method, τ, γ), methods outermost. Kernel methods use
/// the target Gram at (τ, γ); PCA + k-means ignores the kernel, so its
/// result is computed once and repeated across the grid.
pub fn clustering_candidates<P: ParMap>(
    records: &[ShadowRecord],
    features: &[Vec<f64>],
    grid: &[(f64, f64)],
    methods: &[ClusterMethod],
    s: &ClusterSettings,
    exec: &P,
) -> Result<Vec<ClusterCandidate>, BaselineError> {
    let kernel = methods.iter().any(|m| *m != ClusterMethod::PcaKMeans);
    let grams = if kernel { gram_matrices(records, grid, s.mode).map_err(|e| BaselineError::Shadow(alloc::format!("{e}")))? } else { Vec::new() };
    let pca_result = if methods.contains(&ClusterMethod::PcaKMeans) {
        let seed = rng::derive_seed(s.seed, &[rng::tag("pca-kmeans")]);
        Some(pca_kmeans(features, s.pca_dims, s.classes, seed, s.restarts)?)
    } else {
        None
    };
    let jobs: Vec<(ClusterMethod, usize)> = methods.iter().flat_map(|&m| (0..grid.len()).map(move |g| (m, g))).collect();
    let out = exec.map(jobs.len(), |j| -> Result<ClusterCandidate, BaselineError> {
        let (m, g) = jobs[j];
        let seed = rng::derive_seed(s.seed, &[rng::tag(m.name()), g as u64]);
        let assignment = match m {
            ClusterMethod::KernelKMeans => kernel_kmeans(&grams[g], s.classes, seed, s.restarts)?,
            ClusterMethod::Spectral => spectral_clustering(&grams[g], s.classes, seed, s.restarts)?,
            ClusterMethod::PcaKMeans => pca_result.clone().ok_or(BaselineError::InvalidInput("pca features missing"))?,
        };
        Ok(ClusterCandidate { method: m, tau: grid[g].0, gamma: grid[g].1, assignment })
    });
    out.into_iter().collect()
}
