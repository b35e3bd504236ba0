//! Score-maximizing cluster-to-class relabeling for evaluation.

use alloc::vec::Vec;

use crate::bench::macro_f1;

/// Per-(cluster, class) F1 contribution 2·n_kc/(|k| + |c|); zero for
/// classes absent from the truth. Macro-F1 of a one-to-one mapping is the
/// mean of the selected entries over present classes.
fn f1_weights(labels: &[usize], truth: &[usize], m: usize) -> Vec<f64> {
    let mut joint = alloc::vec![0usize; m * m];
    let mut csize = alloc::vec![0usize; m];
    let mut tsize = alloc::vec![0usize; m];
    for (&l, &t) in labels.iter().zip(truth) {
        joint[l * m + t] += 1;
        csize[l] += 1;
        tsize[t] += 1;
    }
    let mut w = alloc::vec![0.0; m * m];
    for k in 0..m {
        for c in 0..m {
            if tsize[c] > 0 && joint[k * m + c] > 0 {
                w[k * m + c] = 2.0 * joint[k * m + c] as f64 / (csize[k] + tsize[c]) as f64;
            }
        }
    }
    w
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Exhaustive maximum-weight assignment; first maximum in lexicographic
/// order wins.
pub fn assignment_exhaustive(w: &[f64], m: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..m).collect();
    let mut best = p.clone();
    let mut best_v = f64::NEG_INFINITY;
    loop {
        let v: f64 = p.iter().enumerate().map(|(k, &c)| w[k * m + c]).sum();
        if v > best_v + 1e-12 {
            best_v = v;
            best.clone_from(&p);
        }
        if !next_permutation(&mut p) {
            return best;
        }
    }
}

/// Maximum-weight perfect matching on a square `m × m` matrix (shortest
/// augmenting path Hungarian method on negated weights). Returns the class
/// for each row.
pub fn assignment_hungarian(w: &[f64], m: usize) -> Vec<usize> {
    let cost = |i: usize, j: usize| -w[(i - 1) * m + (j - 1)];
    let inf = f64::INFINITY;
    let mut u = alloc::vec![0.0; m + 1];
    let mut v = alloc::vec![0.0; m + 1];
    let mut p = alloc::vec![0usize; m + 1];
    let mut way = alloc::vec![0usize; m + 1];
    for i in 1..=m {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = alloc::vec![inf; m + 1];
        let mut used = alloc::vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = alloc::vec![0; m];
    for j in 1..=m {
        out[p[j] - 1] = j - 1;
    }
    out
}

/// Relabel clusters one-to-one onto classes to maximize macro-F1 against
/// the hidden labels. Evaluation only. Returns the relabeled assignment and
/// its macro-F1.
pub fn relabel_to_truth(labels: &[usize], truth: &[usize], clusters: usize, classes: usize) -> (Vec<usize>, f64) {
    assert_eq!(labels.len(), truth.len());
    let m = clusters.max(classes).max(labels.iter().chain(truth).copied().max().map_or(0, |v| v + 1));
    let w = f1_weights(labels, truth, m);
    let map = if m <= 6 { assignment_exhaustive(&w, m) } else { assignment_hungarian(&w, m) };
    let relabeled: Vec<usize> = labels.iter().map(|&l| map[l]).collect();
    let score = macro_f1(truth, &relabeled, m);
    (relabeled, score)
}

pub fn f1_weight_matrix(labels: &[usize], truth: &[usize], m: usize) -> Vec<f64> {
    f1_weights(labels, truth, m)
}
