//! Dense revised simplex for small-row linear programs.
//!
//! Solves `min cᵀy  s.t.  A y = b, y ≥ 0` with `b ≥ 0` by the two-phase
//! method. The basis is refactorized by LU every iteration (the row count is
//! small), which keeps the method stable on the nearly dependent columns that
//! fine discretization grids produce. Dantzig pricing switches to Bland's
//! rule after a run of degenerate pivots.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

#[cfg_attr(not(test), allow(dead_code))]
pub(crate) struct LpSolution {
    pub y: Vec<f64>,
    /// Simplex multipliers π with Bᵀπ = c_B.
    pub duals: Vec<f64>,
    pub objective: f64,
}

struct Problem<'a> {
    cols: &'a [Vec<f64>],
    m: usize,
    b: &'a [f64],
}

impl Problem<'_> {
    fn entry(&self, row: usize, j: usize) -> f64 {
        if j < self.cols.len() {
            self.cols[j][row]
        } else if j - self.cols.len() == row {
            1.0
        } else {
            0.0
        }
    }

    fn col_dot(&self, v: &[f64], j: usize) -> f64 {
        if j < self.cols.len() {
            v.iter().zip(&self.cols[j]).map(|(a, b)| a * b).sum()
        } else {
            v[j - self.cols.len()]
        }
    }

    fn basis_matrix(&self, basis: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(self.m, self.m, |r, c| self.entry(r, basis[c]))
    }
}

struct Factored {
    xb: Vec<f64>,
    pi: Vec<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

fn factor(p: &Problem, basis: &[usize], cost: &dyn Fn(usize) -> f64) -> Result<Factored, &'static str> {
    let bm = p.basis_matrix(basis);
    let lu = bm.clone().lu();
    let xb = lu.solve(&DVector::from_column_slice(p.b)).ok_or("singular basis")?;
    let cb = DVector::from_iterator(p.m, basis.iter().map(|&j| cost(j)));
    let pi = bm.transpose().lu().solve(&cb).ok_or("singular basis")?;
    Ok(Factored { xb: xb.iter().copied().collect(), pi: pi.iter().copied().collect(), lu })
}

fn optimize(
    p: &Problem,
    basis: &mut [usize],
    cost: &dyn Fn(usize) -> f64,
    allowed: &dyn Fn(usize) -> bool,
    max_iter: usize,
) -> Result<Factored, &'static str> {
    let total = p.cols.len() + p.m;
    let mut degenerate_run = 0usize;
    let mut bland = false;
    let mut in_basis = alloc::vec![false; total];
    for &j in basis.iter() {
        in_basis[j] = true;
    }
    for _ in 0..max_iter {
        let f = factor(p, basis, cost)?;
        let scale = f.pi.iter().fold(1.0f64, |a, &x| a.max(x.abs()));
        let eps = 1e-10 * scale;
        let mut entering: Option<(usize, f64)> = None;
        for j in 0..total {
            if in_basis[j] || !allowed(j) {
                continue;
            }
            let d = cost(j) - p.col_dot(&f.pi, j);
            if d < -eps {
                if bland {
                    entering = Some((j, d));
                    break;
                }
                if entering.is_none_or(|(_, best)| d < best) {
                    entering = Some((j, d));
                }
            }
        }
        let Some((q, _)) = entering else { return Ok(f) };
        let aq = DVector::from_fn(p.m, |r, _| p.entry(r, q));
        let u = f.lu.solve(&aq).ok_or("singular basis")?;
        let umax = u.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let piv_tol = 1e-9 * umax.max(1e-300);
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..p.m {
            if u[i] > piv_tol {
                let t = f.xb[i].max(0.0) / u[i];
                match leave {
                    None => leave = Some((i, t)),
                    Some((li, lt)) => {
                        let tie = (t - lt).abs() <= 1e-12 * lt.abs().max(1e-12);
                        if (t < lt && !tie) || (tie && basis[i] < basis[li]) {
                            leave = Some((i, t));
                        }
                    }
                }
            }
        }
        let Some((r, t)) = leave else { return Err("unbounded linear program") };
        if t <= 1e-13 {
            degenerate_run += 1;
            if degenerate_run > 50 {
                bland = true;
            }
        } else {
            degenerate_run = 0;
        }
        in_basis[basis[r]] = false;
        in_basis[q] = true;
        basis[r] = q;
    }
    Err("simplex iteration limit reached")
}

pub(crate) fn solve(cols: &[Vec<f64>], b: &[f64], c: &[f64], max_iter: usize) -> Result<LpSolution, &'static str> {
    let m = b.len();
    let n = cols.len();
    if b.iter().any(|&x| x < 0.0) {
        return Err("right-hand side must be non-negative");
    }
    let p = Problem { cols, m, b };
    let mut basis: Vec<usize> = (n..n + m).collect();
    let phase1 = |j: usize| if j >= n { 1.0 } else { 0.0 };
    let f = optimize(&p, &mut basis, &phase1, &|_| true, max_iter)?;
    let infeas: f64 = basis.iter().zip(&f.xb).filter(|(&j, _)| j >= n).map(|(_, &x)| x).sum();
    if infeas > 1e-9 {
        return Err("linear program is infeasible");
    }
    // Drive zero-level artificials out of the basis where possible.
    for r in 0..m {
        if basis[r] < n {
            continue;
        }
        let bm = p.basis_matrix(&basis);
        let Some(binv) = bm.try_inverse() else { return Err("singular basis") };
        let row: Vec<f64> = (0..m).map(|k| binv[(r, k)]).collect();
        if let Some(j) = (0..n).filter(|j| !basis.contains(j)).find(|&j| p.col_dot(&row, j).abs() > 1e-9) {
            basis[r] = j;
        }
    }
    let phase2 = |j: usize| if j >= n { 0.0 } else { c[j] };
    let f = optimize(&p, &mut basis, &phase2, &|j| j < n, max_iter)?;
    let mut y = alloc::vec![0.0; n];
    for (i, &j) in basis.iter().enumerate() {
        if j < n {
            y[j] = f.xb[i].max(0.0);
        }
    }
    let objective = y.iter().zip(c).map(|(a, b)| a * b).sum();
    Ok(LpSolution { y, duals: f.pi, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lp() {
        // min -x1 - 2x2 s.t. x1 + x2 + s1 = 4, x1 + 3x2 + s2 = 6
        let cols = vec![vec![1.0, 1.0], vec![1.0, 3.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let sol = solve(&cols, &[4.0, 6.0], &[-1.0, -2.0, 0.0, 0.0], 100).unwrap();
        assert!((sol.y[0] - 3.0).abs() < 1e-12 && (sol.y[1] - 1.0).abs() < 1e-12);
        assert!((sol.objective + 5.0).abs() < 1e-12);
        assert!((sol.duals[0] * 4.0 + sol.duals[1] * 6.0 + 5.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_detected() {
        let cols = vec![vec![1.0, 1.0]];
        assert!(solve(&cols, &[1.0, 2.0], &[0.0], 100).is_err());
    }
}
