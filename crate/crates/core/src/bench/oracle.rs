//! Finite-size phase-label oracles.
//!
//! Labels come from order parameters of the exact ground state at a fixed
//! label size. Thresholds are calibrated once at points where the phase
//! boundary is known exactly (the transverse-field Ising transition at unit
//! field, and the cluster line's self-dual point), so labels flip there by
//! construction. A parameter-space dead-band makes the oracle abstain when
//! any axis neighbour at ±band carries a different label.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::linalg::sym_eigen;
use crate::qsim::{build_hamiltonian, lowest_eigenpairs, Pauli, SpinModel, StateVector, SubspaceRule};

pub const CLUSTER_CLASSES: [&str; 4] = ["trivial", "ferromagnetic", "antiferromagnetic", "spt"];
pub const ANNNI_CLASSES: [&str; 4] = ["ferromagnetic", "antiphase", "floating", "paramagnetic"];

pub fn class_names(model: SpinModel) -> &'static [&'static str] {
    match model {
        SpinModel::Cluster => &CLUSTER_CLASSES,
        SpinModel::Annni => &ANNNI_CLASSES,
    }
}

/// Ground-subspace rule used by the imperfect-preparation model for a phase:
/// the thermodynamic-limit degeneracy for gapped phases and an energy band
/// for the gapless floating phase.
pub fn subspace_rule(model: SpinModel, class: usize) -> SubspaceRule {
    match (model, class) {
        (SpinModel::Cluster, 0) => SubspaceRule::FixedDegeneracy(1),
        (SpinModel::Cluster, 1 | 2) => SubspaceRule::FixedDegeneracy(2),
        (SpinModel::Cluster, _) => SubspaceRule::FixedDegeneracy(4),
        (SpinModel::Annni, 0) => SubspaceRule::FixedDegeneracy(2),
        (SpinModel::Annni, 1) => SubspaceRule::FixedDegeneracy(4),
        (SpinModel::Annni, 2) => SubspaceRule::EnergyBand(3.0),
        (SpinModel::Annni, _) => SubspaceRule::FixedDegeneracy(1),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub n_label: usize,
    /// Parameter-space dead-band; 0 disables abstention.
    pub dead_band: f64,
    pub tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { n_label: 12, dead_band: 0.02, tol: 1e-9 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderParameters {
    /// ⟨X_a X_b⟩ for the near pair (a, b) = (n/2−2, n−1−a) and the far
    /// pair a = ⌊n/6⌋, both centred on the chain.
    pub corr_near: f64,
    pub corr_far: f64,
    /// |⟨X_a Y_{a+1} Z…Z Y_{b−1} X_b⟩|, the cluster string order, on the same pairs.
    pub string_near: f64,
    pub string_far: f64,
    /// max_q S(q)/n² of the X structure factor and its location q ∈ [0, π].
    pub peak: f64,
    pub peak_q: f64,
    /// Half-chain entanglement entropy (nats).
    pub entropy: f64,
}

impl OrderParameters {
    /// Far/near ratios of |corr| and string order. Long-range order keeps
    /// the ratio near 1; disorder sends it to 0.
    pub fn ratios(&self) -> (f64, f64) {
        let r = |far: f64, near: f64| if near.abs() < 1e-9 { 0.0 } else { (far / near).abs() };
        (r(self.corr_far, self.corr_near), r(self.string_far, self.string_near))
    }
}

fn ground_state(model: SpinModel, n: usize, p: (f64, f64), tol: f64) -> Result<StateVector, BenchError> {
    let h = build_hamiltonian(model, n, p)?;
    Ok(lowest_eigenpairs(&h, 1, tol)?.state(0))
}

fn half_chain_entropy(s: &StateVector) -> f64 {
    let half = s.n / 2;
    let (da, db) = (1usize << half, 1usize << (s.n - half));
    // ρ_A = M M† with M[a][b] = ψ(a + b·2^half); real ground states only.
    let mut rho = alloc::vec![0.0; da * da];
    for i in 0..da {
        for j in 0..=i {
            let v: f64 = (0..db).map(|b| s.amplitudes[i + b * da].re * s.amplitudes[j + b * da].re + s.amplitudes[i + b * da].im * s.amplitudes[j + b * da].im).sum();
            rho[i * da + j] = v;
            rho[j * da + i] = v;
        }
    }
    let (vals, _) = sym_eigen(&rho, da);
    vals.iter().filter(|&&p| p > 1e-14).map(|&p| -p * p.ln()).sum()
}

pub fn order_parameters(model: SpinModel, n: usize, p: (f64, f64), tol: f64) -> Result<OrderParameters, BenchError> {
    let s = ground_state(model, n, p, tol)?;
    let string = |a: usize, b: usize| {
        let mut sup = alloc::vec![(a, Pauli::X), (a + 1, Pauli::Y)];
        sup.extend((a + 2..b - 1).map(|m| (m, Pauli::Z)));
        sup.extend([(b - 1, Pauli::Y), (b, Pauli::X)]);
        s.expectation(&sup).re.abs()
    };
    let near = n / 2 - 2;
    let far = n / 4;
    let corr = |a: usize| s.expectation(&[(a, Pauli::X), (n - 1 - a, Pauli::X)]).re;
    let mut c = alloc::vec![0.0; n * n];
    for i in 0..n {
        c[i * n + i] = 1.0;
        for j in 0..i {
            let v = s.expectation(&[(j, Pauli::X), (i, Pauli::X)]).re;
            c[i * n + j] = v;
            c[j * n + i] = v;
        }
    }
    let mut peak = f64::NEG_INFINITY;
    let mut peak_q = 0.0;
    let steps = 8 * n;
    for t in 0..=steps {
        let q = core::f64::consts::PI * t as f64 / steps as f64;
        let sq: f64 = (0..n * n).map(|x| c[x] * (q * (x / n) as f64 - q * (x % n) as f64).cos()).sum::<f64>() / (n * n) as f64;
        if sq > peak + 1e-12 {
            peak = sq;
            peak_q = q;
        }
    }
    Ok(OrderParameters {
        corr_near: corr(near),
        corr_far: corr(far),
        string_near: string(near, n - 1 - near),
        string_far: string(far, n - 1 - far),
        peak,
        peak_q,
        entropy: half_chain_entropy(&s),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseOracle {
    pub model: SpinModel,
    pub config: OracleConfig,
    /// Cluster: far/near ratios of |corr| at (h1, h2) = (1, 0) and of string
    /// order at (0, 1). ANNNI: structure-factor peak and entropy at (κ, h) = (0, 1).
    pub thresholds: (f64, f64),
}

impl PhaseOracle {
    pub fn calibrate(model: SpinModel, config: OracleConfig) -> Result<Self, BenchError> {
        if config.n_label < 8 {
            return Err(BenchError::InvalidInput("label size must be at least 8"));
        }
        let n = config.n_label;
        let thresholds = match model {
            SpinModel::Cluster => {
                let fm = order_parameters(model, n, (1.0, 0.0), config.tol)?;
                let spt = order_parameters(model, n, (0.0, 1.0), config.tol)?;
                (fm.corr_far.abs(), spt.string_far)
            }
            SpinModel::Annni => {
                let ising = order_parameters(model, n, (0.0, 1.0), config.tol)?;
                (ising.peak, ising.entropy)
            }
        };
        Ok(PhaseOracle { model, config, thresholds })
    }

    pub fn classes(&self) -> usize {
        class_names(self.model).len()
    }

    /// Label from the order parameters at one point, without dead-band.
    pub fn raw_label(&self, p: (f64, f64)) -> Result<usize, BenchError> {
        let o = order_parameters(self.model, self.config.n_label, p, self.config.tol)?;
        Ok(self.classify(&o))
    }

    pub fn classify(&self, o: &OrderParameters) -> usize {
        let (t0, t1) = self.thresholds;
        match self.model {
            SpinModel::Cluster => {
                let (om, os) = (o.corr_far.abs() / t0, o.string_far / t1);
                if os > 1.0 && os >= om {
                    3
                } else if om > 1.0 {
                    if o.corr_far > 0.0 {
                        1
                    } else {
                        2
                    }
                } else {
                    0
                }
            }
            SpinModel::Annni => {
                let quarter = core::f64::consts::FRAC_PI_4;
                if o.peak > t0 {
                    // Commensurate peaks at q = 0 (ferromagnet) and q = π/2
                    // (period-four antiphase); anything between is floating.
                    if o.peak_q < quarter / 4.0 {
                        0
                    } else if (o.peak_q - 2.0 * quarter).abs() < quarter / 4.0 {
                        1
                    } else {
                        2
                    }
                } else if o.entropy > t1 {
                    2
                } else {
                    3
                }
            }
        }
    }

    /// Label with dead-band: `None` when a neighbour at ±band along either
    /// axis disagrees.
    pub fn label(&self, p: (f64, f64)) -> Result<Option<usize>, BenchError> {
        let l = self.raw_label(p)?;
        let d = self.config.dead_band;
        if d > 0.0 {
            for q in [(p.0 + d, p.1), (p.0 - d, p.1), (p.0, p.1 + d), (p.0, p.1 - d)] {
                if self.raw_label(q)? != l {
                    log::debug!("oracle abstains at {p:?}");
                    return Ok(None);
                }
            }
        }
        Ok(Some(l))
    }
}

/// Labels for a list of points (no dead-band), in order.
pub fn label_points(oracle: &PhaseOracle, points: &[(f64, f64)]) -> Result<Vec<usize>, BenchError> {
    points.iter().map(|&p| oracle.raw_label(p)).collect()
}
