//! Lattice feature tensors built from two-site Pauli expectations.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{shot_factor, ShadowError, ShadowRecord};
use crate::qsim::{exact_two_site_paulis, Pauli, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Shadow,
    Exact,
}

/// `spatial × channels` values, row-major by site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureTensor {
    pub spatial: usize,
    pub channels: usize,
    pub values: Vec<f64>,
    pub k: usize,
    pub estimator: Estimator,
}

impl FeatureTensor {
    pub fn at(&self, site: usize, channel: usize) -> f64 {
        self.values[site * self.channels + channel]
    }

    /// Channel-major copy (`channels × spatial`), the layout the network eats.
    pub fn channel_major(&self) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.values.len()];
        for i in 0..self.spatial {
            for c in 0..self.channels {
                out[c * self.spatial + i] = self.values[i * self.channels + c];
            }
        }
        out
    }
}

/// The 15 non-identity pairs (P, Q), row-major over (I, X, Y, Z)².
pub fn canonical_pairs() -> [(Pauli, Pauli); 15] {
    let mut out = [(Pauli::I, Pauli::I); 15];
    let mut a = 0;
    for p in Pauli::ALL {
        for q in Pauli::ALL {
            if (p, q) != (Pauli::I, Pauli::I) {
                out[a] = (p, q);
                a += 1;
            }
        }
    }
    out
}

fn check_k(n: usize, k: usize) -> Result<(), ShadowError> {
    if k == 0 || k >= n {
        return Err(ShadowError::InvalidInput("neighbor range k must satisfy 1 <= k < n"));
    }
    Ok(())
}

/// Shadow estimate of Φ_k^1: site i in 0..n−k, channel 15(m−1)+a holds
/// ⟨P_a(i) Q_a(i+m)⟩ for m = 1..=k.
pub fn feature_map_phi1k(record: &ShadowRecord, k: usize) -> Result<FeatureTensor, ShadowError> {
    let n = record.n;
    check_k(n, k)?;
    let pairs = canonical_pairs();
    let spatial = n - k;
    let channels = 15 * k;
    let mut acc = alloc::vec![0.0; spatial * channels];
    // Per-site factor for each letter, indexed [site][I, X, Y, Z].
    let mut g = alloc::vec![[0.0f64; 4]; n];
    for t in 0..record.shots {
        let (b, o) = record.shot(t);
        for j in 0..n {
            for (l, p) in Pauli::ALL.iter().enumerate() {
                g[j][l] = shot_factor(b[j], o[j], *p);
            }
        }
        for i in 0..spatial {
            let row = &mut acc[i * channels..(i + 1) * channels];
            for m in 1..=k {
                for (a, &(p, q)) in pairs.iter().enumerate() {
                    row[15 * (m - 1) + a] += g[i][p as usize] * g[i + m][q as usize];
                }
            }
        }
    }
    let inv = if record.shots > 0 { 1.0 / record.shots as f64 } else { 0.0 };
    acc.iter_mut().for_each(|v| *v *= inv);
    Ok(FeatureTensor { spatial, channels, values: acc, k, estimator: Estimator::Shadow })
}

/// Exact-expectation variant of Φ_k^1.
pub fn feature_map_exact(state: &StateVector, k: usize) -> Result<FeatureTensor, ShadowError> {
    let n = state.n;
    check_k(n, k)?;
    let pairs = canonical_pairs();
    let spatial = n - k;
    let channels = 15 * k;
    let mut values = Vec::with_capacity(spatial * channels);
    for i in 0..spatial {
        let sites: Vec<(usize, usize)> = (1..=k).map(|m| (i, i + m)).collect();
        values.extend(exact_two_site_paulis(state, &sites, &pairs));
    }
    Ok(FeatureTensor { spatial, channels, values, k, estimator: Estimator::Exact })
}
