//! Pauli classical shadows: sampling, local-Pauli estimators, lattice
//! feature tensors and the shadow kernel.

mod codec;
mod features;
mod kernel;

pub use codec::{decode_binary, encode_binary, CodecError, SHADOW_MAGIC, SHADOW_VERSION};
pub use features::{canonical_pairs, feature_map_exact, feature_map_phi1k, Estimator, FeatureTensor};
pub use kernel::{
    gram_matrices, gram_matrix, pair_histograms, shadow_kernel, trace_table, upper_pairs, GramMatrix, IndexMode,
    KernelHistogram, ShotMasks,
};

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::qsim::{sample_pauli_error, DepolarizingConvention, NoiseSpec, Pauli, StateVector};
use crate::rng::Rng;
use crate::C64;

/// Where a record came from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub state_id: u64,
    pub p_depol: f64,
    pub p_flip: f64,
    pub seed: u64,
}

/// T shots × n qubits of (basis code, outcome bit), row-major by shot.
///
/// Basis codes are X=0, Y=1, Z=2; outcome 0 is the +1 eigenvalue.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowRecord {
    pub n: usize,
    pub shots: usize,
    pub bases: Vec<u8>,
    pub outcomes: Vec<u8>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ShadowError {
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("records have different qubit counts ({0} vs {1})")]
    SizeMismatch(usize, usize),
}

impl ShadowRecord {
    pub fn new(n: usize, bases: Vec<u8>, outcomes: Vec<u8>, provenance: Provenance) -> Result<Self, ShadowError> {
        if n == 0 || bases.len() != outcomes.len() || bases.len() % n != 0 {
            return Err(ShadowError::InvalidInput("inconsistent record dimensions"));
        }
        if bases.iter().any(|&b| b > 2) || outcomes.iter().any(|&o| o > 1) {
            return Err(ShadowError::InvalidInput("basis codes must be 0..=2 and outcomes 0..=1"));
        }
        Ok(ShadowRecord { n, shots: bases.len() / n, bases, outcomes, provenance })
    }

    pub fn shot(&self, t: usize) -> (&[u8], &[u8]) {
        let r = t * self.n..(t + 1) * self.n;
        (&self.bases[r.clone()], &self.outcomes[r])
    }
}

const S: f64 = core::f64::consts::FRAC_1_SQRT_2;

/// Unitary taking the measured basis to Z: rows are the basis eigenvectors
/// (conjugated), +1 eigenvector first.
fn basis_rotation(code: u8) -> [[C64; 2]; 2] {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    match code {
        0 => [[C64::new(S, 0.0), C64::new(S, 0.0)], [C64::new(S, 0.0), C64::new(-S, 0.0)]],
        1 => [[C64::new(S, 0.0), C64::new(0.0, -S)], [C64::new(S, 0.0), C64::new(0.0, S)]],
        _ => [[o, z], [z, o]],
    }
}

/// Measure every qubit of `amps` in the given bases by sequential collapse,
/// lowest qubit first. `amps` is used as scratch.
fn measure_sequential(amps: &mut Vec<C64>, bases: &[u8], out: &mut [u8], rng: &mut Rng) {
    for (j, &code) in bases.iter().enumerate() {
        let u = basis_rotation(code);
        let half = amps.len() / 2;
        let mut p0 = 0.0;
        for k in 0..half {
            let (a, b) = (amps[2 * k], amps[2 * k + 1]);
            p0 += (u[0][0] * a + u[0][1] * b).norm_sqr();
        }
        let total: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        let o = usize::from(rng.random::<f64>() * total >= p0);
        let po = if o == 0 { p0 } else { total - p0 };
        let inv = if po > 0.0 { 1.0 / po.sqrt() } else { 0.0 };
        for k in 0..half {
            let (a, b) = (amps[2 * k], amps[2 * k + 1]);
            amps[k] = (u[o][0] * a + u[o][1] * b) * inv;
        }
        amps.truncate(half);
        out[j] = o as u8;
    }
}

pub fn sample_shadow(state: &StateVector, shots: usize, noise: NoiseSpec, rng: &mut Rng) -> ShadowRecord {
    sample_shadow_with(state, shots, noise, DepolarizingConvention::default(), rng)
}

/// Randomized single-qubit Pauli measurements with depolarizing trajectories
/// and readout flips.
///
/// A trajectory error that anticommutes with the measured basis flips the
/// outcome and one that commutes leaves it unchanged, so errors are realized
/// as outcome flips without touching the amplitudes. This is exact in
/// distribution.
pub fn sample_shadow_with(
    state: &StateVector,
    shots: usize,
    noise: NoiseSpec,
    convention: DepolarizingConvention,
    rng: &mut Rng,
) -> ShadowRecord {
    let n = state.n;
    let mut bases = alloc::vec![0u8; shots * n];
    let mut outcomes = alloc::vec![0u8; shots * n];
    let mut scratch = Vec::with_capacity(state.dim());
    let mut errors = alloc::vec![Pauli::I; n];
    for t in 0..shots {
        for e in errors.iter_mut() {
            *e = sample_pauli_error(noise.p_depol, convention, rng);
        }
        let b = &mut bases[t * n..(t + 1) * n];
        for code in b.iter_mut() {
            *code = rng.random_range(0..3u8);
        }
        scratch.clear();
        scratch.extend_from_slice(&state.amplitudes);
        let o = &mut outcomes[t * n..(t + 1) * n];
        measure_sequential(&mut scratch, b, o, rng);
        for j in 0..n {
            let basis = Pauli::from_basis_code(b[j]).unwrap_or(Pauli::Z);
            if errors[j].anticommutes(basis) {
                o[j] ^= 1;
            }
            if noise.p_flip > 0.0 && rng.random::<f64>() < noise.p_flip {
                o[j] ^= 1;
            }
        }
    }
    ShadowRecord {
        n,
        shots,
        bases,
        outcomes,
        provenance: Provenance { state_id: 0, p_depol: noise.p_depol, p_flip: noise.p_flip, seed: 0 },
    }
}

/// Single-shot inverse-channel factor: 3·(±1) if the basis matches, else 0.
#[inline]
fn shot_factor(basis: u8, outcome: u8, p: Pauli) -> f64 {
    match p.basis_code() {
        None => 1.0,
        Some(c) if c == basis => 3.0 * (1.0 - 2.0 * outcome as f64),
        Some(_) => 0.0,
    }
}

/// Unbiased shadow estimate of Tr[ρ Π P_i] (plain mean over shots).
pub fn estimate_pauli(record: &ShadowRecord, support: &[(usize, Pauli)]) -> Result<f64, ShadowError> {
    for (k, &(i, _)) in support.iter().enumerate() {
        if i >= record.n || support[..k].iter().any(|&(j, _)| j == i) {
            return Err(ShadowError::InvalidInput("support sites must be distinct and in range"));
        }
    }
    if support.is_empty() || record.shots == 0 {
        return Ok(if support.is_empty() { 1.0 } else { 0.0 });
    }
    let mut sum = 0.0;
    for t in 0..record.shots {
        let (b, o) = record.shot(t);
        let mut v = 1.0;
        for &(i, p) in support {
            v *= shot_factor(b[i], o[i], p);
            if v == 0.0 {
                break;
            }
        }
        sum += v;
    }
    Ok(sum / record.shots as f64)
}
