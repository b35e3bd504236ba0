//! The feature extractor / classifier / discriminator bundle.

use alloc::vec::Vec;
use alloc::{format, vec};
use serde::{Deserialize, Serialize};

use super::layers::*;
use super::params::{AdamConfig, ParamId, ParamStore};
use super::TensorError;
use crate::rng::{self, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    pub fn index(self) -> usize {
        match self {
            Domain::Source => 0,
            Domain::Target => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

/// Input shape as (channels, length).
pub type Shape = (usize, usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Adapter {
    Identity,
    Dense { w: ParamId, b: ParamId, in_dim: usize, out_dim: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub w: ParamId,
    pub b: ParamId,
    pub cin: usize,
    pub cout: usize,
    pub pool: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BnBranch {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearLayer {
    pub w: ParamId,
    pub b: ParamId,
    pub fan_in: usize,
    pub out: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub source_shape: Shape,
    pub target_shape: Shape,
    pub classes: usize,
    pub feature_dim: usize,
    pub bn_momentum: f64,
    pub bn_eps: f64,
    /// When false every domain uses the source BN branch.
    pub dsbn: bool,
    pub store: ParamStore,
    pub adapters: [Adapter; 2],
    pub convs: Vec<ConvLayer>,
    pub bns: Vec<[BnBranch; 2]>,
    pub fc1: LinearLayer,
    pub cls: LinearLayer,
    pub disc: LinearLayer,
    /// Bumped on every parameter update; caches from older versions are stale.
    pub version: u64,
}

fn linear(store: &mut ParamStore, name: &str, fan_in: usize, out: usize, rng: &mut Rng) -> LinearLayer {
    let w = store.add_uniform(&format!("{name}.w"), vec![out, fan_in], fan_in, rng);
    let b = store.add_const(&format!("{name}.b"), vec![out], 0.0);
    LinearLayer { w, b, fan_in, out }
}

/// Conv widths, pooling flags and the flattened length for (C, L).
pub fn architecture(c: usize, l: usize) -> (Vec<(usize, usize, bool)>, usize) {
    let w1 = 2 * (c + 1);
    let layers = vec![(c, w1, false), (w1, 2 * w1, true), (2 * w1, 4 * w1, false), (4 * w1, 4 * w1, true), (4 * w1, 8 * w1, true)];
    (layers, l / 2 / 2 / 2)
}

pub fn build_model(l: usize, c: usize, classes: usize, seed: u64) -> Result<ModelBundle, TensorError> {
    build_model_adapted((c, l), (c, l), classes, seed)
}

/// Model whose common input shape is the target shape; the source adapter
/// is identity when shapes coincide and a trainable dense map otherwise.
pub fn build_model_adapted(source: Shape, target: Shape, classes: usize, seed: u64) -> Result<ModelBundle, TensorError> {
    let (c, l) = target;
    if l < 8 || source.1 < 1 {
        return Err(TensorError::InvalidInput("spatial length must be at least 8"));
    }
    if c == 0 || source.0 == 0 || classes < 2 {
        return Err(TensorError::InvalidInput("need channels >= 1 and at least 2 classes"));
    }
    let mut rng = rng::stream(seed, rng::tag("init"), 0);
    let mut store = ParamStore::default();
    let src_adapter = if source == target {
        Adapter::Identity
    } else {
        let (i, o) = (source.0 * source.1, c * l);
        let w = store.add_uniform("adapter.s.w", vec![o, i], i, &mut rng);
        let b = store.add_const("adapter.s.b", vec![o], 0.0);
        Adapter::Dense { w, b, in_dim: i, out_dim: o }
    };
    let (arch, flat_len) = architecture(c, l);
    let mut convs = Vec::new();
    let mut bns = Vec::new();
    for (k, &(cin, cout, pool)) in arch.iter().enumerate() {
        let w = store.add_uniform(&format!("conv{}.w", k + 1), vec![cout, cin, 3], 3 * cin, &mut rng);
        let b = store.add_const(&format!("conv{}.b", k + 1), vec![cout], 0.0);
        convs.push(ConvLayer { w, b, cin, cout, pool });
        let branch = |store: &mut ParamStore, tag: &str| BnBranch {
            gamma: store.add_const(&format!("bn{}.{tag}.gamma", k + 1), vec![cout], 1.0),
            beta: store.add_const(&format!("bn{}.{tag}.beta", k + 1), vec![cout], 0.0),
            running_mean: vec![0.0; cout],
            running_var: vec![1.0; cout],
        };
        bns.push([branch(&mut store, "s"), branch(&mut store, "t")]);
    }
    let c5 = arch[4].1;
    let feature_dim = c5 / 4;
    let fc1 = linear(&mut store, "fc1", c5 * flat_len, feature_dim, &mut rng);
    let cls = linear(&mut store, "cls", feature_dim, classes, &mut rng);
    let disc = linear(&mut store, "disc", feature_dim * classes, 2, &mut rng);
    Ok(ModelBundle {
        source_shape: source,
        target_shape: target,
        classes,
        feature_dim,
        bn_momentum: 0.1,
        bn_eps: 1e-5,
        dsbn: true,
        store,
        adapters: [src_adapter, Adapter::Identity],
        convs,
        bns,
        fc1,
        cls,
        disc,
        version: 0,
    })
}

struct BlockCache {
    x_shape: (usize, usize, usize),
    cols: Vec<f64>,
    bn: Option<BnCache>,
    relu_out: Vec<f64>,
    pool_arg: Option<Vec<usize>>,
}

/// Everything the backward pass needs from one forward pass.
pub struct ForwardCache {
    version: u64,
    mode: Mode,
    domain: Domain,
    batch: usize,
    adapter_in: Option<Vec<f64>>,
    blocks: Vec<BlockCache>,
    flat: Vec<f64>,
    h: Vec<f64>,
}

pub struct ForwardOutput {
    /// `batch × feature_dim`.
    pub h: Vec<f64>,
    /// `batch × classes`.
    pub logits: Vec<f64>,
    pub p: Vec<f64>,
    pub cache: ForwardCache,
}

impl ModelBundle {
    pub fn input_shape(&self, d: Domain) -> Shape {
        match d {
            Domain::Source => self.source_shape,
            Domain::Target => self.target_shape,
        }
    }

    fn branch(&self, d: Domain) -> usize {
        if self.dsbn {
            d.index()
        } else {
            0
        }
    }

    /// Running (mean, var) of every BN layer in the branch `d` selects.
    pub fn dsbn_stats(&self, d: Domain) -> Vec<(&[f64], &[f64])> {
        let k = self.branch(d);
        self.bns.iter().map(|b| (b[k].running_mean.as_slice(), b[k].running_var.as_slice())).collect()
    }

    pub fn forward(&mut self, x: &Tensor3, d: Domain, mode: Mode) -> Result<ForwardOutput, TensorError> {
        let (c, l) = self.input_shape(d);
        if x.channels != c || x.length != l {
            return Err(TensorError::ShapeMismatch { expected: (c, l), got: (x.channels, x.length) });
        }
        let batch = x.batch;
        if batch == 0 {
            return Err(TensorError::InvalidInput("empty batch"));
        }
        if mode == Mode::Train && batch < 2 {
            return Err(TensorError::BatchTooSmall);
        }
        let (adapter_in, mut a) = match &self.adapters[d.index()] {
            Adapter::Identity => (None, x.clone()),
            Adapter::Dense { w, b, out_dim, .. } => {
                let rows = x.to_rows();
                let y = linear_forward(&rows, batch, self.store.value(*w), self.store.value(*b), *out_dim);
                let (tc, tl) = self.target_shape;
                (Some(rows), Tensor3::from_rows(&y, batch, tc, tl))
            }
        };
        let br = self.branch(d);
        let mut blocks = Vec::with_capacity(self.convs.len());
        for (k, conv) in self.convs.iter().enumerate() {
            let x_shape = (a.batch, a.channels, a.length);
            let (y, cols) = conv1d_forward(&a, self.store.value(conv.w), self.store.value(conv.b), conv.cout);
            let bnb = &mut self.bns[k][br];
            let (gamma, beta) = (self.store.value(bnb.gamma), self.store.value(bnb.beta));
            let (mut y, bn) = match mode {
                Mode::Train => {
                    let (y, cache) = bn_forward_train(&y, gamma, beta, self.bn_eps);
                    let m = self.bn_momentum;
                    let n = cache.count as f64;
                    for ch in 0..conv.cout {
                        bnb.running_mean[ch] = (1.0 - m) * bnb.running_mean[ch] + m * cache.mean[ch];
                        bnb.running_var[ch] = (1.0 - m) * bnb.running_var[ch] + m * cache.var[ch] * n / (n - 1.0);
                    }
                    (y, Some(cache))
                }
                Mode::Eval => (bn_forward_eval(&y, gamma, beta, &bnb.running_mean, &bnb.running_var, self.bn_eps), None),
            };
            relu_forward(&mut y.data);
            let relu_out = y.data.clone();
            let pool_arg = if conv.pool {
                let (p, arg) = maxpool_forward(&y);
                y = p;
                Some(arg)
            } else {
                None
            };
            blocks.push(BlockCache { x_shape, cols, bn, relu_out, pool_arg });
            a = y;
        }
        let flat = a.to_rows();
        let mut h = linear_forward(&flat, batch, self.store.value(self.fc1.w), self.store.value(self.fc1.b), self.fc1.out);
        relu_forward(&mut h);
        let logits = linear_forward(&h, batch, self.store.value(self.cls.w), self.store.value(self.cls.b), self.classes);
        let p = softmax(&logits, self.classes);
        let cache = ForwardCache { version: self.version, mode, domain: d, batch, adapter_in, blocks, flat, h: h.clone() };
        Ok(ForwardOutput { h, logits, p, cache })
    }

    /// Accumulate parameter gradients from upstream gradients on the
    /// features `dh` and the class logits `dlogits`.
    pub fn backward(&mut self, cache: ForwardCache, dh: &[f64], dlogits: &[f64]) -> Result<(), TensorError> {
        if cache.version != self.version {
            return Err(TensorError::StaleCache);
        }
        if cache.mode != Mode::Train {
            return Err(TensorError::InvalidInput("backward needs a train-mode forward cache"));
        }
        let batch = cache.batch;
        let mut dh_total = {
            let cls = &self.cls;
            let (w, b) = (cls.w, cls.b);
            let wv = self.store.value(w).to_vec();
            let mut db = vec![0.0; cls.out];
            let dx = {
                let dw = self.store.grad_mut(w);
                linear_backward(&cache.h, batch, &wv, dlogits, cls.out, dw, &mut db)
            };
            self.store.grad_mut(b).iter_mut().zip(&db).for_each(|(g, d)| *g += d);
            dx
        };
        dh_total.iter_mut().zip(dh).for_each(|(a, b)| *a += b);
        relu_backward(&cache.h, &mut dh_total);
        let dflat = self.linear_grad(&self.fc1.clone(), &cache.flat, batch, &dh_total);
        let last = self.convs.last().map(|c| c.cout).unwrap_or(0);
        let mut da = Tensor3::from_rows(&dflat, batch, last, dflat.len() / (batch * last));
        let br = self.branch(cache.domain);
        for k in (0..self.convs.len()).rev() {
            let blk = &cache.blocks[k];
            let conv = self.convs[k].clone();
            let pre_pool = (blk.x_shape.0, conv.cout, blk.x_shape.2);
            if let Some(arg) = &blk.pool_arg {
                da = maxpool_backward(pre_pool, arg, &da);
            }
            relu_backward(&blk.relu_out, &mut da.data);
            let bnb = &self.bns[k][br];
            let (gid, bid) = (bnb.gamma, bnb.beta);
            let gamma = self.store.value(gid).to_vec();
            let mut dgamma = vec![0.0; conv.cout];
            let mut dbeta = vec![0.0; conv.cout];
            let bn = blk.bn.as_ref().ok_or(TensorError::InvalidInput("missing batch-norm cache"))?;
            da = bn_backward(bn, &gamma, &da, &mut dgamma, &mut dbeta);
            self.store.grad_mut(gid).iter_mut().zip(&dgamma).for_each(|(g, d)| *g += d);
            self.store.grad_mut(bid).iter_mut().zip(&dbeta).for_each(|(g, d)| *g += d);
            let w = self.store.value(conv.w).to_vec();
            let mut db = vec![0.0; conv.cout];
            da = conv1d_backward(blk.x_shape, &blk.cols, &w, &da, self.store.grad_mut(conv.w), &mut db);
            self.store.grad_mut(conv.b).iter_mut().zip(&db).for_each(|(g, d)| *g += d);
        }
        if let (Adapter::Dense { w, b, out_dim, in_dim }, Some(rows)) = (&self.adapters[cache.domain.index()].clone(), &cache.adapter_in) {
            let dy = da.to_rows();
            let l = LinearLayer { w: *w, b: *b, fan_in: *in_dim, out: *out_dim };
            self.linear_grad(&l, rows, batch, &dy);
        }
        Ok(())
    }

    fn linear_grad(&mut self, l: &LinearLayer, x: &[f64], rows: usize, dy: &[f64]) -> Vec<f64> {
        let w = self.store.value(l.w).to_vec();
        let mut db = vec![0.0; l.out];
        let dx = linear_backward(x, rows, &w, dy, l.out, self.store.grad_mut(l.w), &mut db);
        self.store.grad_mut(l.b).iter_mut().zip(&db).for_each(|(g, d)| *g += d);
        dx
    }

    /// Discriminator logits (`rows × 2`) for inputs `u` (`rows × F·K`).
    pub fn disc_forward(&self, u: &[f64], rows: usize) -> Vec<f64> {
        linear_forward(u, rows, self.store.value(self.disc.w), self.store.value(self.disc.b), 2)
    }

    /// Accumulates discriminator gradients; returns the gradient on `u`.
    pub fn disc_backward(&mut self, u: &[f64], rows: usize, dlogits: &[f64]) -> Vec<f64> {
        let d = self.disc.clone();
        self.linear_grad(&d, u, rows, dlogits)
    }

    pub fn zero_grad(&mut self) {
        self.store.zero_grad();
    }

    pub fn adam_step(&mut self, cfg: &AdamConfig) {
        self.store.adam_step(cfg);
        self.version += 1;
    }

    /// Class probabilities in eval mode, `rows × classes`.
    pub fn predict(&mut self, x: &Tensor3, d: Domain) -> Result<Vec<f64>, TensorError> {
        Ok(self.forward(x, d, Mode::Eval)?.p)
    }
}

/// u = vec(h ⊗ p), row-major with index i·K + y.
pub fn kronecker_rows(h: &[f64], p: &[f64], rows: usize, f: usize, k: usize) -> Vec<f64> {
    let mut u = vec![0.0; rows * f * k];
    for r in 0..rows {
        for i in 0..f {
            for y in 0..k {
                u[r * f * k + i * k + y] = h[r * f + i] * p[r * k + y];
            }
        }
    }
    u
}

/// Split a gradient on u back onto h and p.
pub fn kronecker_backward(du: &[f64], h: &[f64], p: &[f64], rows: usize, f: usize, k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut dh = vec![0.0; rows * f];
    let mut dp = vec![0.0; rows * k];
    for r in 0..rows {
        for i in 0..f {
            for y in 0..k {
                let g = du[r * f * k + i * k + y];
                dh[r * f + i] += g * p[r * k + y];
                dp[r * k + y] += g * h[r * f + i];
            }
        }
    }
    (dh, dp)
}
