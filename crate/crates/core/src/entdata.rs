//! Generators for the entanglement benchmarks: Haar states, partitioned
//! separable states, and GHZ/W classes pushed through random local layers.

use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::linalg::{complex_gaussian, complex_gaussian_vec};
use crate::qsim::{pauli_matrix, Pauli, QsimError, StateVector};
use crate::rng::{self, Rng};
use crate::C64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EntError {
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("local layer annihilated the state")]
    Annihilated,
    #[error(transparent)]
    Qsim(#[from] QsimError),
}

/// Ordered disjoint blocks covering sites 0..n.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub n: usize,
    pub blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self, EntError> {
        let mut seen = alloc::vec![false; n];
        for b in &blocks {
            if b.is_empty() {
                return Err(EntError::InvalidInput("partition blocks must be nonempty"));
            }
            for &s in b {
                if s >= n || seen[s] {
                    return Err(EntError::InvalidInput("partition blocks must be disjoint and in range"));
                }
                seen[s] = true;
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(EntError::InvalidInput("partition must cover every site"));
        }
        Ok(Partition { n, blocks })
    }

    /// Contiguous blocks with sizes differing by at most one, larger first.
    pub fn contiguous(n: usize, parts: usize) -> Result<Self, EntError> {
        if parts == 0 || parts > n {
            return Err(EntError::InvalidInput("need 1 <= parts <= n"));
        }
        let mut blocks = Vec::with_capacity(parts);
        let mut start = 0;
        for p in 0..parts {
            let len = n / parts + usize::from(p < n % parts);
            blocks.push((start..start + len).collect());
            start += len;
        }
        Partition::new(n, blocks)
    }

    /// Block label of each site.
    pub fn labels(&self) -> Vec<usize> {
        let mut l = alloc::vec![0; self.n];
        for (k, b) in self.blocks.iter().enumerate() {
            for &s in b {
                l[s] = k;
            }
        }
        l
    }
}

pub fn haar_state(n: usize, rng: &mut Rng) -> StateVector {
    loop {
        if let Ok(s) = StateVector::normalized(n, complex_gaussian_vec(1usize << n, rng)) {
            return s;
        }
    }
}

/// Uniform over surjective labelings of sites with `parts` labels.
pub fn random_partition(n: usize, parts: usize, rng: &mut Rng) -> Result<Partition, EntError> {
    if parts == 0 || parts > n {
        return Err(EntError::InvalidInput("need 1 <= parts <= n"));
    }
    loop {
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..parts)).collect();
        let mut blocks = alloc::vec![Vec::new(); parts];
        for (s, &l) in labels.iter().enumerate() {
            blocks[l].push(s);
        }
        if blocks.iter().all(|b| !b.is_empty()) {
            return Partition::new(n, blocks);
        }
    }
}

/// Tensor product of independent Haar states on the blocks.
pub fn separable_state(partition: &Partition, rng: &mut Rng) -> StateVector {
    let factors: Vec<StateVector> = partition.blocks.iter().map(|b| haar_state(b.len(), rng)).collect();
    let d = 1usize << partition.n;
    let mut amps = alloc::vec![C64::new(1.0, 0.0); d];
    for (b, f) in partition.blocks.iter().zip(&factors) {
        for (idx, a) in amps.iter_mut().enumerate() {
            let local: usize = b.iter().enumerate().map(|(j, &s)| ((idx >> s) & 1) << j).sum();
            *a *= f.amplitudes[local];
        }
    }
    StateVector { n: partition.n, amplitudes: amps }
}

pub fn ghz_state(n: usize) -> Result<StateVector, EntError> {
    if n < 2 {
        return Err(EntError::InvalidInput("GHZ needs n >= 2"));
    }
    let d = 1usize << n;
    let mut a = alloc::vec![C64::new(0.0, 0.0); d];
    a[0] = C64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
    a[d - 1] = a[0];
    Ok(StateVector { n, amplitudes: a })
}

pub fn w_state(n: usize) -> Result<StateVector, EntError> {
    if n < 2 {
        return Err(EntError::InvalidInput("W needs n >= 2"));
    }
    let mut a = alloc::vec![C64::new(0.0, 0.0); 1usize << n];
    let v = 1.0 / (n as f64).sqrt();
    for j in 0..n {
        a[1 << j] = C64::new(v, 0.0);
    }
    Ok(StateVector { n, amplitudes: a })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Slocc,
    Pauli,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalOperatorLayer {
    pub kind: LayerKind,
    pub mats: Vec<[[C64; 2]; 2]>,
}

/// Singular values (max, min) of a 2×2 complex matrix.
pub fn singular_values_2x2(m: &[[C64; 2]; 2]) -> (f64, f64) {
    let fro: f64 = m.iter().flatten().map(|z| z.norm_sqr()).sum();
    let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).norm_sqr();
    let disc = (fro * fro - 4.0 * det).max(0.0).sqrt();
    (((fro + disc) / 2.0).sqrt(), ((fro - disc) / 2.0).max(0.0).sqrt())
}

impl LocalOperatorLayer {
    pub fn identity(n: usize, kind: LayerKind) -> Self {
        LocalOperatorLayer { kind, mats: alloc::vec![pauli_matrix(Pauli::I); n] }
    }

    /// A_j = M/‖M‖₂ with M complex Ginibre, redrawn until cond(M) ≤ bound.
    /// A bound ≤ 1 selects the identity layer.
    pub fn random_slocc(n: usize, cond_bound: f64, rng: &mut Rng) -> Self {
        if cond_bound <= 1.0 {
            return Self::identity(n, LayerKind::Slocc);
        }
        let mats = (0..n)
            .map(|_| loop {
                let m = [[complex_gaussian(rng), complex_gaussian(rng)], [complex_gaussian(rng), complex_gaussian(rng)]];
                let (smax, smin) = singular_values_2x2(&m);
                if smin > 0.0 && smax / smin <= cond_bound {
                    break m.map(|r| r.map(|z| z / smax));
                }
            })
            .collect();
        LocalOperatorLayer { kind: LayerKind::Slocc, mats }
    }

    /// Independent uniform draws from {I, X, Y, Z}.
    pub fn random_pauli(n: usize, rng: &mut Rng) -> Self {
        let mats = (0..n).map(|_| pauli_matrix(Pauli::ALL[rng.random_range(0..4)])).collect();
        LocalOperatorLayer { kind: LayerKind::Pauli, mats }
    }
}

/// Apply ⊗_j A_j and renormalize.
pub fn apply_local_layer(state: &StateVector, layer: &LocalOperatorLayer) -> Result<StateVector, EntError> {
    if layer.mats.len() != state.n {
        return Err(EntError::InvalidInput("layer size does not match qubit count"));
    }
    let mut out = state.clone();
    for (j, m) in layer.mats.iter().enumerate() {
        out.apply_1q(j, m);
    }
    StateVector::normalized(state.n, out.amplitudes).map_err(|_| EntError::Annihilated)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMode {
    Fixed,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SepEntConfig {
    pub n: usize,
    pub parts: usize,
    pub partition_mode: PartitionMode,
    pub count_per_class: usize,
    pub noisy: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GhzwConfig {
    pub n: usize,
    pub generation: LayerKind,
    pub count_per_class: usize,
    pub noisy: bool,
    /// Condition-number bound for SLOCC draws.
    pub slocc_bound: f64,
}

/// One generated state with its label and provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntSample {
    pub id: u64,
    pub class: usize,
    pub generator: String,
    pub partition: Option<Partition>,
    pub layer_seed: u64,
    pub state: StateVector,
}

/// Class 0: separable across the (fixed or per-sample) partition.
/// Class 1: global Haar state.
pub fn gen_sep_ent_dataset(cfg: &SepEntConfig, seed: u64) -> Result<Vec<EntSample>, EntError> {
    let fixed = Partition::contiguous(cfg.n, cfg.parts)?;
    let domain = rng::tag("sepent");
    let mut out = Vec::with_capacity(2 * cfg.count_per_class);
    for class in 0..2 {
        for i in 0..cfg.count_per_class {
            let id = (class * cfg.count_per_class + i) as u64;
            let layer_seed = rng::derive_seed(seed, &[domain, id]);
            let mut g = rng::from_seed(layer_seed);
            let sample = if class == 0 {
                let p = match cfg.partition_mode {
                    PartitionMode::Fixed => fixed.clone(),
                    PartitionMode::Random => random_partition(cfg.n, cfg.parts, &mut g)?,
                };
                let state = separable_state(&p, &mut g);
                EntSample { id, class, generator: "separable".into(), partition: Some(p), layer_seed, state }
            } else {
                let state = haar_state(cfg.n, &mut g);
                EntSample { id, class, generator: "global_haar".into(), partition: None, layer_seed, state }
            };
            out.push(sample);
        }
    }
    Ok(out)
}

/// Class 0: GHZ pushed through one random layer; class 1: W likewise.
pub fn gen_ghzw_dataset(cfg: &GhzwConfig, seed: u64) -> Result<Vec<EntSample>, EntError> {
    let domain = rng::tag("ghzw");
    let canon = [ghz_state(cfg.n)?, w_state(cfg.n)?];
    let mut out = Vec::with_capacity(2 * cfg.count_per_class);
    for (class, base) in canon.iter().enumerate() {
        for i in 0..cfg.count_per_class {
            let id = (class * cfg.count_per_class + i) as u64;
            let layer_seed = rng::derive_seed(seed, &[domain, id]);
            let mut g = rng::from_seed(layer_seed);
            let state = loop {
                let layer = match cfg.generation {
                    LayerKind::Slocc => LocalOperatorLayer::random_slocc(cfg.n, cfg.slocc_bound, &mut g),
                    LayerKind::Pauli => LocalOperatorLayer::random_pauli(cfg.n, &mut g),
                };
                match apply_local_layer(base, &layer) {
                    Ok(s) => break s,
                    Err(EntError::Annihilated) => continue,
                    Err(e) => return Err(e),
                }
            };
            let generator = match (class, cfg.generation) {
                (0, LayerKind::Slocc) => "ghz_slocc",
                (0, LayerKind::Pauli) => "ghz_pauli",
                (_, LayerKind::Slocc) => "w_slocc",
                (_, LayerKind::Pauli) => "w_pauli",
            };
            out.push(EntSample { id, class, generator: generator.into(), partition: None, layer_seed, state });
        }
    }
    Ok(out)
}
