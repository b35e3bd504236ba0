//! Macro-F1 and trial aggregation.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Unweighted mean of per-class F1. Classes absent from the truth are
/// excluded; classes present in the truth but never predicted score 0.
pub fn macro_f1(truth: &[usize], pred: &[usize], classes: usize) -> f64 {
    assert_eq!(truth.len(), pred.len());
    let mut tp = alloc::vec![0usize; classes];
    let mut fp = alloc::vec![0usize; classes];
    let mut fn_ = alloc::vec![0usize; classes];
    for (&t, &p) in truth.iter().zip(pred) {
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let mut sum = 0.0;
    let mut count = 0;
    for c in 0..classes {
        if tp[c] + fn_[c] == 0 {
            continue;
        }
        count += 1;
        let denom = 2 * tp[c] + fp[c] + fn_[c];
        sum += 2.0 * tp[c] as f64 / denom as f64;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub mean: f64,
    /// Sample standard deviation (n−1); 0 for a single value.
    pub std: f64,
    pub count: usize,
}

pub fn aggregate(values: &[f64]) -> Summary {
    assert!(!values.is_empty(), "aggregate needs at least one value");
    let n = values.len();
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 { (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
    Summary { median, mean, std, count: n }
}

/// Row argmax with ties to the lowest index.
pub fn argmax_rows(p: &[f64], k: usize) -> Vec<usize> {
    p.chunks(k)
        .map(|r| {
            let mut best = 0;
            for i in 1..k {
                if r[i] > r[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}
