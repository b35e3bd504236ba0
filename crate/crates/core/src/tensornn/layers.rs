//! Functional layer kernels with explicit forward and backward passes.
//!
//! Activations are channel-major: `(channels, batch, length)`.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::linalg::gemm;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    pub batch: usize,
    pub channels: usize,
    pub length: usize,
    /// Index `(c·batch + b)·length + l`.
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(batch: usize, channels: usize, length: usize) -> Self {
        Tensor3 { batch, channels, length, data: alloc::vec![0.0; batch * channels * length] }
    }

    /// Stack per-sample channel-major (`channels × length`) buffers.
    pub fn from_samples(samples: &[&[f64]], channels: usize, length: usize) -> Self {
        let batch = samples.len();
        let mut t = Tensor3::zeros(batch, channels, length);
        for (b, s) in samples.iter().enumerate() {
            assert_eq!(s.len(), channels * length, "sample shape mismatch");
            for c in 0..channels {
                let dst = (c * batch + b) * length;
                t.data[dst..dst + length].copy_from_slice(&s[c * length..(c + 1) * length]);
            }
        }
        t
    }

    #[inline]
    pub fn idx(&self, b: usize, c: usize, l: usize) -> usize {
        (c * self.batch + b) * self.length + l
    }

    /// Per-sample flattened rows (`batch × channels·length`, index c·L + l).
    pub fn to_rows(&self) -> Vec<f64> {
        let (bn, cn, ln) = (self.batch, self.channels, self.length);
        let mut out = alloc::vec![0.0; self.data.len()];
        for c in 0..cn {
            for b in 0..bn {
                let src = (c * bn + b) * ln;
                let dst = b * cn * ln + c * ln;
                out[dst..dst + ln].copy_from_slice(&self.data[src..src + ln]);
            }
        }
        out
    }

    pub fn from_rows(rows: &[f64], batch: usize, channels: usize, length: usize) -> Self {
        let per: Vec<&[f64]> = rows.chunks(channels * length).collect();
        assert_eq!(per.len(), batch);
        Tensor3::from_samples(&per, channels, length)
    }
}

/// `y = x·Wᵀ + b` for row-major `x` (`rows × fan_in`), `w` (`out × fan_in`).
pub fn linear_forward(x: &[f64], rows: usize, w: &[f64], b: &[f64], out: usize) -> Vec<f64> {
    let fan_in = w.len() / out;
    let mut y = alloc::vec![0.0; rows * out];
    for r in 0..rows {
        y[r * out..(r + 1) * out].copy_from_slice(b);
    }
    gemm(rows, fan_in, out, 1.0, x, fan_in as isize, 1, w, 1, fan_in as isize, 1.0, &mut y, out as isize, 1);
    y
}

/// Accumulates `dw`, `db`; returns `dx`.
pub fn linear_backward(x: &[f64], rows: usize, w: &[f64], dy: &[f64], out: usize, dw: &mut [f64], db: &mut [f64]) -> Vec<f64> {
    let fan_in = w.len() / out;
    // dw += dyᵀ·x
    gemm(out, rows, fan_in, 1.0, dy, 1, out as isize, x, fan_in as isize, 1, 1.0, dw, fan_in as isize, 1);
    for r in 0..rows {
        for o in 0..out {
            db[o] += dy[r * out + o];
        }
    }
    let mut dx = alloc::vec![0.0; rows * fan_in];
    gemm(rows, out, fan_in, 1.0, dy, out as isize, 1, w, fan_in as isize, 1, 0.0, &mut dx, fan_in as isize, 1);
    dx
}

/// im2col for kernel 3, padding 1: rows `ci·3 + k`, columns `b·L + l`.
fn im2col(x: &Tensor3) -> Vec<f64> {
    let (bn, cn, ln) = (x.batch, x.channels, x.length);
    let cols_n = bn * ln;
    let mut cols = alloc::vec![0.0; 3 * cn * cols_n];
    for c in 0..cn {
        for k in 0..3 {
            let row = &mut cols[(c * 3 + k) * cols_n..(c * 3 + k + 1) * cols_n];
            for b in 0..bn {
                let src = &x.data[(c * bn + b) * ln..(c * bn + b + 1) * ln];
                let dst = &mut row[b * ln..(b + 1) * ln];
                match k {
                    0 => dst[1..].copy_from_slice(&src[..ln - 1]),
                    1 => dst.copy_from_slice(src),
                    _ => dst[..ln - 1].copy_from_slice(&src[1..]),
                }
            }
        }
    }
    cols
}

/// Conv1d(kernel 3, padding 1). `w` is `(out, in, 3)`. Returns output and
/// the im2col buffer needed by the backward pass.
pub fn conv1d_forward(x: &Tensor3, w: &[f64], b: &[f64], out_ch: usize) -> (Tensor3, Vec<f64>) {
    assert_eq!(w.len(), out_ch * x.channels * 3);
    let cols = im2col(x);
    let n = x.batch * x.length;
    let kk = 3 * x.channels;
    let mut y = Tensor3::zeros(x.batch, out_ch, x.length);
    for o in 0..out_ch {
        y.data[o * n..(o + 1) * n].fill(b[o]);
    }
    gemm(out_ch, kk, n, 1.0, w, kk as isize, 1, &cols, n as isize, 1, 1.0, &mut y.data, n as isize, 1);
    (y, cols)
}

/// Accumulates `dw`, `db`; returns `dx`.
pub fn conv1d_backward(x_shape: (usize, usize, usize), cols: &[f64], w: &[f64], dy: &Tensor3, dw: &mut [f64], db: &mut [f64]) -> Tensor3 {
    let (bn, cn, ln) = x_shape;
    let out_ch = dy.channels;
    let n = bn * ln;
    let kk = 3 * cn;
    gemm(out_ch, n, kk, 1.0, &dy.data, n as isize, 1, cols, 1, n as isize, 1.0, dw, kk as isize, 1);
    for o in 0..out_ch {
        db[o] += dy.data[o * n..(o + 1) * n].iter().sum::<f64>();
    }
    let mut dcols = alloc::vec![0.0; kk * n];
    gemm(kk, out_ch, n, 1.0, w, 1, kk as isize, &dy.data, n as isize, 1, 0.0, &mut dcols, n as isize, 1);
    let mut dx = Tensor3::zeros(bn, cn, ln);
    for c in 0..cn {
        for k in 0..3 {
            let row = &dcols[(c * 3 + k) * n..(c * 3 + k + 1) * n];
            for b in 0..bn {
                let src = &row[b * ln..(b + 1) * ln];
                let dst = &mut dx.data[(c * bn + b) * ln..(c * bn + b + 1) * ln];
                match k {
                    0 => dst[..ln - 1].iter_mut().zip(&src[1..]).for_each(|(d, s)| *d += s),
                    1 => dst.iter_mut().zip(src).for_each(|(d, s)| *d += s),
                    _ => dst[1..].iter_mut().zip(&src[..ln - 1]).for_each(|(d, s)| *d += s),
                }
            }
        }
    }
    dx
}

#[derive(Clone, Debug, PartialEq)]
pub struct BnCache {
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
    pub mean: Vec<f64>,
    /// Biased batch variance.
    pub var: Vec<f64>,
    pub count: usize,
}

/// Train-mode batch normalization over (batch, length) per channel.
pub fn bn_forward_train(x: &Tensor3, gamma: &[f64], beta: &[f64], eps: f64) -> (Tensor3, BnCache) {
    let n = x.batch * x.length;
    let mut y = x.clone();
    let mut cache = BnCache {
        xhat: alloc::vec![0.0; x.data.len()],
        inv_std: Vec::with_capacity(x.channels),
        mean: Vec::with_capacity(x.channels),
        var: Vec::with_capacity(x.channels),
        count: n,
    };
    for c in 0..x.channels {
        let s = &x.data[c * n..(c + 1) * n];
        let mean = s.iter().sum::<f64>() / n as f64;
        let var = s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let inv = 1.0 / (var + eps).sqrt();
        for i in 0..n {
            let xh = (s[i] - mean) * inv;
            cache.xhat[c * n + i] = xh;
            y.data[c * n + i] = gamma[c] * xh + beta[c];
        }
        cache.inv_std.push(inv);
        cache.mean.push(mean);
        cache.var.push(var);
    }
    (y, cache)
}

pub fn bn_forward_eval(x: &Tensor3, gamma: &[f64], beta: &[f64], mean: &[f64], var: &[f64], eps: f64) -> Tensor3 {
    let n = x.batch * x.length;
    let mut y = x.clone();
    for c in 0..x.channels {
        let inv = 1.0 / (var[c] + eps).sqrt();
        for v in &mut y.data[c * n..(c + 1) * n] {
            *v = gamma[c] * (*v - mean[c]) * inv + beta[c];
        }
    }
    y
}

/// Accumulates `dgamma`, `dbeta`; returns `dx`.
pub fn bn_backward(cache: &BnCache, gamma: &[f64], dy: &Tensor3, dgamma: &mut [f64], dbeta: &mut [f64]) -> Tensor3 {
    let n = cache.count;
    let mut dx = dy.clone();
    for c in 0..dy.channels {
        let d = &dy.data[c * n..(c + 1) * n];
        let xh = &cache.xhat[c * n..(c + 1) * n];
        let sum_d: f64 = d.iter().sum();
        let sum_dx: f64 = d.iter().zip(xh).map(|(a, b)| a * b).sum();
        dgamma[c] += sum_dx;
        dbeta[c] += sum_d;
        let k = gamma[c] * cache.inv_std[c] / n as f64;
        for i in 0..n {
            dx.data[c * n + i] = k * (n as f64 * d[i] - sum_d - xh[i] * sum_dx);
        }
    }
    dx
}

pub fn relu_forward(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = v.max(0.0));
}

/// Gradient through ReLU given its output.
pub fn relu_backward(y: &[f64], dy: &mut [f64]) {
    dy.iter_mut().zip(y).for_each(|(d, &v)| {
        if v <= 0.0 {
            *d = 0.0
        }
    });
}

/// MaxPool1d(2) with floor semantics; returns output and argmax indices
/// into the input buffer.
pub fn maxpool_forward(x: &Tensor3) -> (Tensor3, Vec<usize>) {
    let lo = x.length / 2;
    let mut y = Tensor3::zeros(x.batch, x.channels, lo);
    let mut arg = alloc::vec![0usize; y.data.len()];
    for cb in 0..x.channels * x.batch {
        for l in 0..lo {
            let i0 = cb * x.length + 2 * l;
            let i = if x.data[i0 + 1] > x.data[i0] { i0 + 1 } else { i0 };
            y.data[cb * lo + l] = x.data[i];
            arg[cb * lo + l] = i;
        }
    }
    (y, arg)
}

pub fn maxpool_backward(x_shape: (usize, usize, usize), arg: &[usize], dy: &Tensor3) -> Tensor3 {
    let (bn, cn, ln) = x_shape;
    let mut dx = Tensor3::zeros(bn, cn, ln);
    for (j, &i) in arg.iter().enumerate() {
        dx.data[i] += dy.data[j];
    }
    dx
}

/// Row-wise softmax of `rows × k` logits.
pub fn softmax(logits: &[f64], k: usize) -> Vec<f64> {
    let mut p = logits.to_vec();
    for row in p.chunks_mut(k) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        row.iter_mut().for_each(|v| *v /= s);
    }
    p
}

/// Pull a gradient on probabilities back to logits.
pub fn softmax_backward(p: &[f64], dp: &[f64], k: usize) -> Vec<f64> {
    let mut dz = alloc::vec![0.0; p.len()];
    for ((pr, dr), zr) in p.chunks(k).zip(dp.chunks(k)).zip(dz.chunks_mut(k)) {
        let dot: f64 = pr.iter().zip(dr).map(|(a, b)| a * b).sum();
        for i in 0..k {
            zr[i] = pr[i] * (dr[i] - dot);
        }
    }
    dz
}

/// Per-row natural-log entropy.
pub fn entropy_rows(p: &[f64], k: usize) -> Vec<f64> {
    p.chunks(k).map(|r| -r.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()).collect()
}

/// Weighted mean cross-entropy of logits against integer labels and its
/// gradient on the logits: Σ_r w_r·CE_r / rows.
pub fn weighted_cross_entropy(logits: &[f64], k: usize, labels: &[usize], weights: &[f64]) -> (f64, Vec<f64>) {
    let rows = labels.len();
    let p = softmax(logits, k);
    let mut loss = 0.0;
    let mut dz = p.clone();
    for r in 0..rows {
        let y = labels[r];
        let lse = {
            let row = &logits[r * k..(r + 1) * k];
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
        };
        loss += weights[r] * (lse - logits[r * k + y]);
        dz[r * k + y] -= 1.0;
        for v in &mut dz[r * k..(r + 1) * k] {
            *v *= weights[r] / rows as f64;
        }
    }
    (loss / rows as f64, dz)
}

/// Gradient reversal: identity forward, −λ·upstream backward.
pub fn grl_backward(dy: &[f64], lambda: f64) -> Vec<f64> {
    dy.iter().map(|v| -lambda * v).collect()
}
