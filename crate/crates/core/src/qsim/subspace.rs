//! Low-energy subspaces and raw imperfect target states.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::lanczos::EigenPairs;
use super::state::StateVector;
use super::QsimError;
use crate::linalg::{cnorm_sqr, complex_gaussian_vec};
use crate::rng::Rng;
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubspaceRule {
    /// The `d0` lowest eigenpairs.
    FixedDegeneracy(usize),
    /// Every index with E ≤ E0 + multiplier·(E1 − E0).
    EnergyBand(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceSpec {
    pub rule: SubspaceRule,
    pub indices: Vec<usize>,
}

pub fn resolve_subspace(eigs: &EigenPairs, rule: SubspaceRule) -> Result<SubspaceSpec, QsimError> {
    let indices = match rule {
        SubspaceRule::FixedDegeneracy(d0) => {
            if d0 == 0 || eigs.len() < d0 {
                return Err(QsimError::InsufficientEigenpairs { needed: d0.max(1), have: eigs.len() });
            }
            (0..d0).collect()
        }
        SubspaceRule::EnergyBand(mult) => {
            if eigs.len() < 2 {
                return Err(QsimError::InsufficientEigenpairs { needed: 2, have: eigs.len() });
            }
            let e = &eigs.energies;
            let thr = e[0] + mult * (e[1] - e[0]);
            // energies are ascending, so the band is a prefix
            (0..e.iter().take_while(|&&x| x <= thr).count().max(1)).collect()
        }
    };
    Ok(SubspaceSpec { rule, indices })
}

/// Coefficients ⟨φ_m|ψ⟩ in the computed eigenbasis.
pub fn eigen_coefficients(state: &StateVector, eigs: &EigenPairs) -> Vec<C64> {
    eigs.vectors
        .iter()
        .map(|v| v.iter().zip(&state.amplitudes).map(|(&p, a)| a * p).sum())
        .collect()
}

/// Σ_{i∈I_G} |⟨φ_i|ψ⟩|².
pub fn overlap_with_subspace(state: &StateVector, eigs: &EigenPairs, subspace: &SubspaceSpec) -> f64 {
    subspace
        .indices
        .iter()
        .map(|&i| {
            let a: C64 = eigs.vectors[i].iter().zip(&state.amplitudes).map(|(&p, a)| a * p).sum();
            a.norm_sqr()
        })
        .sum()
}

/// Expand eigenbasis coefficients into a state vector.
pub fn synthesize(eigs: &EigenPairs, coeffs: &[C64]) -> Vec<C64> {
    let dim = 1usize << eigs.n;
    let mut amps = alloc::vec![C64::new(0.0, 0.0); dim];
    for (v, &c) in eigs.vectors.iter().zip(coeffs) {
        for (a, &p) in amps.iter_mut().zip(v) {
            *a += c * p;
        }
    }
    amps
}

/// √f·v_g + √(1−f)·v_e with f uniform on `f_range`, v_g Haar on the
/// subspace and v_e Haar on its complement inside the computed span.
/// Returns the state and the drawn f.
pub fn sample_raw_state(
    eigs: &EigenPairs,
    subspace: &SubspaceSpec,
    f_range: (f64, f64),
    rng: &mut Rng,
) -> Result<(StateVector, f64), QsimError> {
    let (lo, hi) = f_range;
    if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(QsimError::InvalidInput("f_range must be a subinterval of [0, 1]"));
    }
    let m = eigs.len();
    let g = subspace.indices.len();
    if g == 0 || subspace.indices.iter().any(|&i| i >= m) {
        return Err(QsimError::InvalidInput("subspace indices out of range"));
    }
    if m <= g {
        return Err(QsimError::EmptyComplement);
    }
    let f = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let in_g: Vec<bool> = (0..m).map(|i| subspace.indices.contains(&i)).collect();
    let mut vg = complex_gaussian_vec(g, rng);
    let mut ve = complex_gaussian_vec(m - g, rng);
    let ng = cnorm_sqr(&vg).sqrt();
    let ne = cnorm_sqr(&ve).sqrt();
    let (sf, se) = (f.sqrt() / ng, (1.0 - f).sqrt() / ne);
    vg.iter_mut().for_each(|x| *x *= sf);
    ve.iter_mut().for_each(|x| *x *= se);
    let (mut ig, mut ie) = (vg.into_iter(), ve.into_iter());
    let coeffs: Vec<C64> = in_g
        .iter()
        .map(|&b| if b { ig.next().unwrap() } else { ie.next().unwrap() })
        .collect();
    let amps = synthesize(eigs, &coeffs);
    Ok((StateVector::normalized(eigs.n, amps)?, f))
}
