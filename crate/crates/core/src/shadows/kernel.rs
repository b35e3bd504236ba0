//! Shadow kernel between records and Gram matrices.
//!
//! S_{l,l'} only takes a handful of values, so each record pair is reduced
//! once to a histogram of S over all shot pairs. Every (τ, γ) grid point is
//! then evaluated from the histogram.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{ShadowError, ShadowRecord};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexMode {
    /// S = Σ_j Tr(σ_{j,l} σ_{j,l'}).
    #[default]
    Matched,
    /// S = Σ_{j,j'} Tr(σ_{j,l} σ_{j',l'}).
    DoubleSum,
}

/// Tr[(3|a⟩⟨a|−I)(3|b⟩⟨b|−I)] over snapshot states indexed 2·basis + outcome.
pub fn trace_table() -> [[f64; 6]; 6] {
    let mut t = [[0.0; 6]; 6];
    for (a, row) in t.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            *v = if a / 2 != b / 2 {
                0.5
            } else if a == b {
                5.0
            } else {
                -4.0
            };
        }
    }
    t
}

/// Bitmasks of one shot: sites measured in X, Y, Z and sites with outcome 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShotMasks {
    pub x: u64,
    pub y: u64,
    pub z: u64,
    pub o: u64,
}

impl ShotMasks {
    pub fn of_record(r: &ShadowRecord) -> Result<Vec<ShotMasks>, ShadowError> {
        if r.n > 64 {
            return Err(ShadowError::InvalidInput("kernel supports at most 64 qubits"));
        }
        Ok((0..r.shots)
            .map(|t| {
                let (b, o) = r.shot(t);
                let mut m = ShotMasks { x: 0, y: 0, z: 0, o: 0 };
                for j in 0..r.n {
                    let bit = 1u64 << j;
                    match b[j] {
                        0 => m.x |= bit,
                        1 => m.y |= bit,
                        _ => m.z |= bit,
                    }
                    if o[j] != 0 {
                        m.o |= bit;
                    }
                }
                m
            })
            .collect())
    }
}

/// Counts of 2·S_{l,l'} over all shot pairs of two records.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelHistogram {
    pub n: usize,
    pub pairs: u64,
    /// (2·S, count), ascending in 2·S, zero counts dropped.
    pub bins: Vec<(i64, u64)>,
}

impl KernelHistogram {
    pub fn compute(a: &ShadowRecord, b: &ShadowRecord, mode: IndexMode) -> Result<Self, ShadowError> {
        if a.n != b.n {
            return Err(ShadowError::SizeMismatch(a.n, b.n));
        }
        match mode {
            IndexMode::Matched => Ok(Self::matched(a.n, &ShotMasks::of_record(a)?, &ShotMasks::of_record(b)?)),
            IndexMode::DoubleSum => Ok(Self::double_sum(a, b)),
        }
    }

    /// Matched-index histogram from precomputed shot masks.
    pub fn matched(n: usize, a: &[ShotMasks], b: &[ShotMasks]) -> Self {
        // Same-basis sites `s` and same-outcome among them `c` determine
        // 2S = 10c − 8(s−c) + (n−s).
        let w = n + 1;
        let mut counts = alloc::vec![0u64; w * w];
        for p in a {
            for q in b {
                let same = (p.x & q.x) | (p.y & q.y) | (p.z & q.z);
                let s = same.count_ones() as usize;
                let c = (same & !(p.o ^ q.o)).count_ones() as usize;
                counts[s * w + c] += 1;
            }
        }
        let mut bins: Vec<(i64, u64)> = Vec::new();
        for s in 0..=n {
            for c in 0..=s {
                let k = counts[s * w + c];
                if k > 0 {
                    bins.push((18 * c as i64 - 9 * s as i64 + n as i64, k));
                }
            }
        }
        Self::finish(n, (a.len() * b.len()) as u64, bins)
    }

    fn double_sum(a: &ShadowRecord, b: &ShadowRecord) -> Self {
        let n = a.n;
        let t2: [[i64; 6]; 6] = trace_table().map(|r| r.map(|v| (2.0 * v) as i64));
        let counts = |r: &ShadowRecord| -> Vec<[i64; 6]> {
            (0..r.shots)
                .map(|t| {
                    let (bs, os) = r.shot(t);
                    let mut c = [0i64; 6];
                    for j in 0..r.n {
                        c[2 * bs[j] as usize + os[j] as usize] += 1;
                    }
                    c
                })
                .collect()
        };
        let ca = counts(a);
        let tb: Vec<[i64; 6]> = counts(b)
            .iter()
            .map(|c| core::array::from_fn(|u| (0..6).map(|v| t2[u][v] * c[v]).sum()))
            .collect();
        let off = 8 * (n * n) as i64;
        let mut dense = alloc::vec![0u64; 18 * n * n + 1];
        for p in &ca {
            for q in &tb {
                let s2: i64 = (0..6).map(|u| p[u] * q[u]).sum();
                dense[(s2 + off) as usize] += 1;
            }
        }
        let bins = dense.iter().enumerate().filter(|(_, &k)| k > 0).map(|(i, &k)| (i as i64 - off, k)).collect();
        Self::finish(n, (a.shots * b.shots) as u64, bins)
    }

    fn finish(n: usize, pairs: u64, bins: Vec<(i64, u64)>) -> Self {
        let mut bins = bins;
        bins.sort_unstable();
        KernelHistogram { n, pairs, bins }
    }

    /// exp( τ/(T_a T_b) Σ_{l,l'} exp(γ S_{l,l'} / n) ).
    pub fn kernel(&self, tau: f64, gamma: f64) -> f64 {
        if self.pairs == 0 {
            return 1.0;
        }
        let inner: f64 =
            self.bins.iter().map(|&(s2, k)| k as f64 * (gamma * 0.5 * s2 as f64 / self.n as f64).exp()).sum();
        (tau * inner / self.pairs as f64).exp()
    }
}

pub fn shadow_kernel(a: &ShadowRecord, b: &ShadowRecord, tau: f64, gamma: f64, mode: IndexMode) -> Result<f64, ShadowError> {
    Ok(KernelHistogram::compute(a, b, mode)?.kernel(tau, gamma))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramMatrix {
    pub size: usize,
    /// Row-major `size × size`.
    pub entries: Vec<f64>,
    pub tau: f64,
    pub gamma: f64,
    pub mode: IndexMode,
}

impl GramMatrix {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    /// Gram matrices for each (τ, γ) from the upper-triangle histograms,
    /// listed row-major over pairs i ≤ j.
    pub fn from_histograms(size: usize, hists: &[KernelHistogram], params: &[(f64, f64)], mode: IndexMode) -> Vec<Self> {
        assert_eq!(hists.len(), size * (size + 1) / 2);
        params
            .iter()
            .map(|&(tau, gamma)| {
                let mut entries = alloc::vec![0.0; size * size];
                let mut idx = 0;
                for i in 0..size {
                    for j in i..size {
                        let v = hists[idx].kernel(tau, gamma);
                        entries[i * size + j] = v;
                        entries[j * size + i] = v;
                        idx += 1;
                    }
                }
                GramMatrix { size, entries, tau, gamma, mode }
            })
            .collect()
    }
}

/// Upper-triangle pair list (i ≤ j), row-major.
pub fn upper_pairs(size: usize) -> Vec<(usize, usize)> {
    (0..size).flat_map(|i| (i..size).map(move |j| (i, j))).collect()
}

/// Histograms for every unordered record pair, each computed once.
pub fn pair_histograms(records: &[ShadowRecord], mode: IndexMode) -> Result<Vec<KernelHistogram>, ShadowError> {
    let n = records.first().map_or(0, |r| r.n);
    if let Some(r) = records.iter().find(|r| r.n != n) {
        return Err(ShadowError::SizeMismatch(n, r.n));
    }
    let masks = match mode {
        IndexMode::Matched => records.iter().map(ShotMasks::of_record).collect::<Result<Vec<_>, _>>()?,
        IndexMode::DoubleSum => Vec::new(),
    };
    upper_pairs(records.len())
        .into_iter()
        .map(|(i, j)| match mode {
            IndexMode::Matched => Ok(KernelHistogram::matched(n, &masks[i], &masks[j])),
            IndexMode::DoubleSum => KernelHistogram::compute(&records[i], &records[j], mode),
        })
        .collect()
}

pub fn gram_matrices(records: &[ShadowRecord], params: &[(f64, f64)], mode: IndexMode) -> Result<Vec<GramMatrix>, ShadowError> {
    if records.is_empty() {
        return Err(ShadowError::InvalidInput("gram matrix needs at least one record"));
    }
    let hists = pair_histograms(records, mode)?;
    Ok(GramMatrix::from_histograms(records.len(), &hists, params, mode))
}

pub fn gram_matrix(records: &[ShadowRecord], tau: f64, gamma: f64, mode: IndexMode) -> Result<GramMatrix, ShadowError> {
    Ok(gram_matrices(records, &[(tau, gamma)], mode)?.remove(0))
}
