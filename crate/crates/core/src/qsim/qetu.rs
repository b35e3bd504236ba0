//! Even-Chebyshev spectral filter in cos(H̃/2) and its application in the
//! computed eigenbasis.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::lanczos::EigenPairs;
use super::simplex;
use super::state::StateVector;
use super::subspace::{eigen_coefficients, synthesize};
use super::QsimError;
use crate::linalg::cnorm_sqr;
use crate::C64;

/// Global bound on |P| over the design interval.
pub const FILTER_BOUND: f64 = 0.999;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QetuFilter {
    pub degree: usize,
    /// α_k multiplying T_{2k}, k = 0..degree/2.
    pub cheb_coeffs: Vec<f64>,
    pub eta: f64,
    pub c1: f64,
    pub c2: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub z_minus: f64,
    pub z_plus: f64,
    /// Optimal equiripple error δ of the discrete design.
    pub minimax_error: f64,
    /// max |P − 1| on the pass window and max |P| on the stop window,
    /// measured on a dense check grid.
    pub pass_error: f64,
    pub stop_error: f64,
    /// max |P| on the check grid over [z_min, z_max].
    pub max_abs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QetuDesign {
    pub eta: f64,
    pub degree: usize,
    pub eps0: f64,
    /// Points per design interval.
    pub grid_points: usize,
}

impl Default for QetuDesign {
    fn default() -> Self {
        QetuDesign { eta: 0.05, degree: 40, eps0: 0.01, grid_points: 512 }
    }
}

/// T_0(z), T_2(z), …, T_{2K}(z).
pub fn even_chebyshev(z: f64, k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(k + 1);
    let (mut t0, mut t1) = (1.0, z);
    out.push(1.0);
    for j in 1..=2 * k {
        let t2 = 2.0 * z * t1 - t0;
        t0 = t1;
        t1 = t2;
        if j % 2 == 1 {
            out.push(t1);
        }
    }
    out
}

fn lobatto(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| 0.5 * (a + b) + 0.5 * (b - a) * (PI * j as f64 / (n - 1) as f64).cos())
        .collect()
}

impl QetuFilter {
    pub fn eval(&self, z: f64) -> f64 {
        even_chebyshev(z, self.cheb_coeffs.len() - 1)
            .iter()
            .zip(&self.cheb_coeffs)
            .map(|(t, a)| t * a)
            .sum()
    }

    /// Filter value applied to an eigenvalue E: P(cos((c1 E + c2)/2)).
    pub fn value_at_energy(&self, e: f64) -> f64 {
        self.eval(((self.c1 * e + self.c2) / 2.0).cos())
    }

    fn measure(&mut self) {
        let grid = |a: f64, b: f64, n: usize| (0..n).map(move |i| a + (b - a) * i as f64 / (n - 1) as f64);
        self.max_abs = grid(self.z_min, self.z_max, 10_000).map(|z| self.eval(z).abs()).fold(0.0, f64::max);
        self.pass_error = grid(self.z_plus, self.z_max, 2_000).map(|z| (self.eval(z) - 1.0).abs()).fold(0.0, f64::max);
        self.stop_error = grid(self.z_min, self.z_minus, 2_000).map(|z| self.eval(z).abs()).fold(0.0, f64::max);
    }
}

/// Design the degree-`degree` even filter for ground energy estimate `e0_est`
/// (precision ±eps0), gap estimate `gap_est` and norm bound `emax`.
///
/// The coefficients solve the discrete minimax problem
/// min δ s.t. |P − 1| ≤ δ on the pass grid, |P| ≤ δ on the stop grid and
/// |P| ≤ 0.999 on a global grid, via the simplex method on its dual (each
/// basis is an exchange reference set). The achieved errors are reported on
/// the filter; only the global bound is enforced, by rescaling after a
/// dense post-check.
pub fn design_qetu_filter(gap_est: f64, e0_est: f64, emax: f64, design: &QetuDesign) -> Result<QetuFilter, QsimError> {
    let QetuDesign { eta, degree, eps0, grid_points } = *design;
    if !(gap_est > 0.0) || !gap_est.is_finite() {
        return Err(QsimError::InvalidInput("gap estimate must be positive"));
    }
    if !(eta > 0.0 && eta < PI / 2.0) {
        return Err(QsimError::InvalidInput("eta must lie in (0, π/2)"));
    }
    if degree < 2 || degree % 2 != 0 {
        return Err(QsimError::InvalidInput("filter degree must be even and ≥ 2"));
    }
    if !(eps0 >= 0.0) || grid_points < 16 {
        return Err(QsimError::InvalidInput("invalid filter design settings"));
    }
    if !(emax > e0_est) {
        return Err(QsimError::InvalidInput("Emax must exceed the ground-energy estimate"));
    }
    let e0_lb = e0_est - eps0;
    let e0_ub = e0_est + eps0;
    let c1 = (PI - 2.0 * eta) / (emax - e0_lb);
    let c2 = eta - c1 * e0_lb;
    let lambda0 = c1 * e0_ub + c2;
    let lambda1 = lambda0 + c1 * gap_est;
    let width = 0.9 * c1 * gap_est;
    let mu = 0.5 * (lambda0 + lambda1);
    let z_plus = ((mu - width / 2.0) / 2.0).cos();
    let z_minus = ((mu + width / 2.0) / 2.0).cos();
    let z_max = (eta / 2.0).cos();
    let z_min = ((PI - eta) / 2.0).cos();
    let (a_plus, a_minus) = (mu - width / 2.0, mu + width / 2.0);
    if !(a_plus >= eta && a_minus < PI - eta && z_minus < z_plus) {
        return Err(QsimError::InfeasibleWindow { gap_est });
    }

    let k = degree / 2;
    let nv = k + 2; // α_0..α_k, δ
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut costs: Vec<f64> = Vec::new();
    // Constraint rows of the primal become dual columns; the δ entry is
    // stored sign-flipped so the dual right-hand side (0,…,0,1) is ≥ 0.
    let mut push = |t: &[f64], sign: f64, delta: f64, rhs: f64| {
        let mut c: Vec<f64> = t.iter().map(|x| sign * x).collect();
        c.push(-delta);
        cols.push(c);
        costs.push(rhs);
    };
    for z in lobatto(z_plus, z_max, grid_points) {
        let t = even_chebyshev(z, k);
        push(&t, 1.0, -1.0, 1.0);
        push(&t, -1.0, -1.0, -1.0);
    }
    for z in lobatto(z_min, z_minus, grid_points) {
        let t = even_chebyshev(z, k);
        push(&t, 1.0, -1.0, 0.0);
        push(&t, -1.0, -1.0, 0.0);
    }
    for z in lobatto(z_min, z_max, 2 * grid_points) {
        let t = even_chebyshev(z, k);
        push(&t, 1.0, 0.0, FILTER_BOUND);
        push(&t, -1.0, 0.0, FILTER_BOUND);
    }
    let mut rhs = alloc::vec![0.0; nv];
    rhs[nv - 1] = 1.0;
    let sol = simplex::solve(&cols, &rhs, &costs, 50_000).map_err(QsimError::FilterDesign)?;
    let cheb_coeffs: Vec<f64> = sol.duals[..=k].to_vec();
    let minimax_error = -sol.duals[k + 1];
    if cheb_coeffs.iter().any(|a| !a.is_finite()) {
        return Err(QsimError::FilterDesign("non-finite filter coefficients"));
    }
    let mut filter = QetuFilter {
        degree,
        cheb_coeffs,
        eta,
        c1,
        c2,
        z_min,
        z_max,
        z_minus,
        z_plus,
        minimax_error,
        pass_error: 0.0,
        stop_error: 0.0,
        max_abs: 0.0,
    };
    filter.measure();
    if filter.max_abs > FILTER_BOUND {
        let s = FILTER_BOUND / filter.max_abs;
        filter.cheb_coeffs.iter_mut().for_each(|a| *a *= s);
        filter.measure();
    }
    Ok(filter)
}

/// Filtered eigenbasis coefficients b_m = P(cos((c1 E_m + c2)/2))·a_m.
pub fn qetu_coefficients(filter: &QetuFilter, eigs: &EigenPairs, coeffs: &[C64]) -> Vec<C64> {
    eigs.energies.iter().zip(coeffs).map(|(&e, &a)| a * filter.value_at_energy(e)).collect()
}

/// Apply the filter to a state lying in the span of the computed eigenpairs.
pub fn apply_qetu(state: &StateVector, eigs: &EigenPairs, filter: &QetuFilter) -> Result<StateVector, QsimError> {
    let a = eigen_coefficients(state, eigs);
    let back = synthesize(eigs, &a);
    let resid: f64 = back.iter().zip(&state.amplitudes).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    if resid > 1e-8 {
        return Err(QsimError::NotInSpan(resid));
    }
    let b = qetu_coefficients(filter, eigs, &a);
    if cnorm_sqr(&b).sqrt() < 1e-12 {
        return Err(QsimError::FilterAnnihilated);
    }
    StateVector::normalized(eigs.n, synthesize(eigs, &b))
}

