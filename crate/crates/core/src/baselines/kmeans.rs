//! Lloyd k-means on a Gram matrix, shared by every clustering baseline.
//!
//! Seeding protocol (per restart r, generator `stream(seed, tag("kmeans"), r)`):
//! the first centre is `random_range(0..n)`; each further centre draws
//! `u = random::<f64>() · ΣD²` and takes the first index whose cumulative D²
//! exceeds `u` (uniform index when ΣD² = 0). Points are then assigned to the
//! nearest seed point, ties to the lowest cluster.

use alloc::vec::Vec;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng;

pub const DEFAULT_RESTARTS: usize = 10;
const MAX_ITER: usize = 300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub clusters: usize,
    /// Σ_x d²(x, μ_{c(x)}) in feature space.
    pub distortion: f64,
    /// Set when the input has no structure (identical rows) or a cluster
    /// ended up empty.
    pub degenerate: bool,
    /// Distortion after every Lloyd assignment of the winning restart.
    pub history: Vec<f64>,
}

impl ClusterAssignment {
    pub fn probs(&self) -> Vec<f64> {
        let mut p = alloc::vec![0.0; self.labels.len() * self.clusters];
        for (i, &y) in self.labels.iter().enumerate() {
            p[i * self.clusters + y] = 1.0;
        }
        p
    }
}

/// Row-major linear Gram XXᵀ of `rows × dim` points.
pub fn linear_gram(x: &[f64], rows: usize, dim: usize) -> Vec<f64> {
    let mut g = alloc::vec![0.0; rows * rows];
    crate::linalg::gemm(rows, dim, rows, 1.0, x, dim as isize, 1, x, 1, dim as isize, 0.0, &mut g, rows as isize, 1);
    g
}

fn kdist(k: &[f64], n: usize, i: usize, j: usize) -> f64 {
    k[i * n + i] - 2.0 * k[i * n + j] + k[j * n + j]
}

/// Kernel distances of every point to every cluster mean, and the
/// distortion of `labels`. Empty clusters get +∞.
fn distances(k: &[f64], n: usize, labels: &[usize], c: usize) -> (Vec<f64>, f64) {
    let mut members: Vec<Vec<usize>> = alloc::vec![Vec::new(); c];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let mut within = alloc::vec![0.0; c];
    for (cl, m) in members.iter().enumerate() {
        if m.is_empty() {
            continue;
        }
        let mut s = 0.0;
        for &a in m {
            for &b in m {
                s += k[a * n + b];
            }
        }
        within[cl] = s / (m.len() * m.len()) as f64;
    }
    let mut d = alloc::vec![f64::INFINITY; n * c];
    for x in 0..n {
        for (cl, m) in members.iter().enumerate() {
            if m.is_empty() {
                continue;
            }
            let cross: f64 = m.iter().map(|&y| k[x * n + y]).sum::<f64>() / m.len() as f64;
            d[x * c + cl] = (k[x * n + x] - 2.0 * cross + within[cl]).max(0.0);
        }
    }
    let dist = labels.iter().enumerate().map(|(x, &l)| d[x * c + l]).sum();
    (d, dist)
}

fn seed_centres(k: &[f64], n: usize, c: usize, g: &mut rng::Rng) -> Vec<usize> {
    let mut centres = alloc::vec![g.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|x| kdist(k, n, x, centres[0]).max(0.0)).collect();
    while centres.len() < c {
        let total: f64 = d2.iter().sum();
        let u = g.random::<f64>() * total;
        let next = if total > 0.0 {
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (x, &v) in d2.iter().enumerate() {
                acc += v;
                if acc > u {
                    pick = x;
                    break;
                }
            }
            pick
        } else {
            g.random_range(0..n)
        };
        centres.push(next);
        for (x, v) in d2.iter_mut().enumerate() {
            *v = v.min(kdist(k, n, x, next).max(0.0));
        }
    }
    centres
}

fn lloyd(k: &[f64], n: usize, c: usize, centres: &[usize]) -> (Vec<usize>, f64, Vec<f64>) {
    let mut labels: Vec<usize> = (0..n)
        .map(|x| {
            let mut best = 0;
            for (j, &ctr) in centres.iter().enumerate() {
                if kdist(k, n, x, ctr) < kdist(k, n, x, centres[best]) {
                    best = j;
                }
            }
            best
        })
        .collect();
    let (mut d, mut dist) = distances(k, n, &labels, c);
    let mut history = alloc::vec![dist];
    for _ in 0..MAX_ITER {
        let mut changed = false;
        for x in 0..n {
            let row = &d[x * c..(x + 1) * c];
            let mut best = labels[x];
            for (j, &v) in row.iter().enumerate() {
                // Move only on strict improvement so the distortion cannot rise.
                if v < row[best] {
                    best = j;
                }
            }
            if best != labels[x] {
                labels[x] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let next = distances(k, n, &labels, c);
        d = next.0;
        debug_assert!(next.1 <= dist * (1.0 + 1e-9) + 1e-12, "distortion rose: {dist} -> {}", next.1);
        dist = next.1;
        history.push(dist);
    }
    (labels, dist, history)
}

fn identical_rows(k: &[f64], n: usize) -> bool {
    let scale = k.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    (1..n).all(|i| (0..n).all(|j| (k[i * n + j] - k[j]).abs() <= 1e-12 * scale))
}

/// Best of `restarts` k-means++ seeded Lloyd runs on a row-major Gram
/// matrix. Ties in final distortion go to the earliest restart.
pub fn kmeans_gram(k: &[f64], n: usize, c: usize, seed: u64, restarts: usize) -> ClusterAssignment {
    assert_eq!(k.len(), n * n);
    assert!(c >= 1 && n >= 1);
    if c > 1 && identical_rows(k, n) {
        log::warn!("all Gram rows identical; returning a single cluster");
        let labels = alloc::vec![0; n];
        let (_, dist) = distances(k, n, &labels, c);
        return ClusterAssignment { labels, clusters: c, distortion: dist, degenerate: true, history: alloc::vec![dist] };
    }
    let mut best: Option<(Vec<usize>, f64, Vec<f64>)> = None;
    for r in 0..restarts.max(1) {
        let mut g = rng::stream(seed, rng::tag("kmeans"), r as u64);
        let centres = seed_centres(k, n, c, &mut g);
        let run = lloyd(k, n, c, &centres);
        if best.as_ref().is_none_or(|b| run.1 < b.1) {
            best = Some(run);
        }
    }
    let (labels, distortion, history) = best.unwrap_or_default();
    let mut used = alloc::vec![false; c];
    labels.iter().for_each(|&l| used[l] = true);
    let degenerate = used.iter().any(|u| !u);
    ClusterAssignment { labels, clusters: c, distortion, degenerate, history }
}

/// Plain k-means on `rows × dim` points (via the linear Gram).
pub fn kmeans_points(x: &[f64], rows: usize, dim: usize, c: usize, seed: u64, restarts: usize) -> ClusterAssignment {
    kmeans_gram(&linear_gram(x, rows, dim), rows, c, seed, restarts)
}
