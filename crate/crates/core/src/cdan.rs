//! Training pipelines: conditional domain-adversarial training with entropy
//! conditioning, source-only ERM with stratified k-fold cross-validation,
//! and prediction.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::bench::{argmax_rows, macro_f1};
use crate::exec::ParMap;
use crate::rng;
use crate::tensornn::{
    build_model_adapted, entropy_rows, grl_backward, kronecker_backward, kronecker_rows, softmax_backward,
    weighted_cross_entropy, AdamConfig, Domain, Mode, ModelBundle, Shape, Tensor3, TensorError,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CdanError {
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("class {class} has {have} samples, fewer than {k} folds")]
    Stratification { class: usize, have: usize, k: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Per-sample channel-major inputs (`channels × length` each).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub shape: Shape,
    pub rows: Vec<Vec<f64>>,
}

impl Features {
    pub fn new(shape: Shape, rows: Vec<Vec<f64>>) -> Result<Self, CdanError> {
        if rows.iter().any(|r| r.len() != shape.0 * shape.1) {
            return Err(CdanError::InvalidInput("feature row length does not match shape"));
        }
        Ok(Features { shape, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Features {
        Features { shape: self.shape, rows: idx.iter().map(|&i| self.rows[i].clone()).collect() }
    }

    pub fn batch(&self, idx: &[usize]) -> Tensor3 {
        let s: Vec<&[f64]> = idx.iter().map(|&i| self.rows[i].as_slice()).collect();
        Tensor3::from_samples(&s, self.shape.0, self.shape.1)
    }

    pub fn all(&self) -> Tensor3 {
        let s: Vec<&[f64]> = self.rows.iter().map(Vec::as_slice).collect();
        Tensor3::from_samples(&s, self.shape.0, self.shape.1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    /// Domain-loss weight; ignored by ERM.
    pub lambda: f64,
    pub seed: u64,
}

/// Hyperparameter grid, enumerated with E outermost, then B, η, λ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub epochs: Vec<usize>,
    pub batch: Vec<usize>,
    pub lr: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl HyperGrid {
    pub fn configs(&self, with_lambda: bool, seed: u64) -> Vec<HyperConfig> {
        let lambdas: &[f64] = if with_lambda { &self.lambda } else { &[0.0] };
        let mut out = Vec::new();
        for &epochs in &self.epochs {
            for &batch in &self.batch {
                for &lr in &self.lr {
                    for &lambda in lambdas {
                        out.push(HyperConfig { epochs, batch, lr, lambda, seed });
                    }
                }
            }
        }
        out
    }

    /// Distinct training runs (B, η, λ), each snapshotted at every epoch
    /// value.
    pub fn runs(&self, with_lambda: bool, seed: u64) -> Vec<HyperConfig> {
        let max_e = self.epochs.iter().copied().max().unwrap_or(0);
        let lambdas: &[f64] = if with_lambda { &self.lambda } else { &[0.0] };
        let mut out = Vec::new();
        for &batch in &self.batch {
            for &lr in &self.lr {
                for &lambda in lambdas {
                    out.push(HyperConfig { epochs: max_e, batch, lr, lambda, seed });
                }
            }
        }
        out
    }

    pub fn sorted_epochs(&self) -> Vec<usize> {
        let mut e = self.epochs.clone();
        e.sort_unstable();
        e.dedup();
        e
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub l_y: f64,
    pub l_dom: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub epoch: usize,
    /// One probability matrix (`rows × classes`) per evaluation set.
    pub predictions: Vec<Vec<f64>>,
    pub model: Option<ModelBundle>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSet {
    pub hyper: HyperConfig,
    pub snapshots: Vec<Snapshot>,
    pub log: Vec<StepLog>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub keep_models: bool,
    pub log_steps: bool,
}

/// w = 1 + e^{−H(p)} per row.
pub fn entropy_weights(p: &[f64], k: usize) -> Vec<f64> {
    entropy_rows(p, k).iter().map(|h| 1.0 + (-h).exp()).collect()
}

/// Weighted domain loss from discriminator logits: mean over source of
/// −w·log D plus mean over target of −w·log(1−D), D = P(source).
pub fn domain_loss(logits_s: &[f64], w_s: &[f64], logits_t: &[f64], w_t: &[f64]) -> f64 {
    let mut l = 0.0;
    if !w_s.is_empty() {
        l += weighted_cross_entropy(logits_s, 2, &alloc::vec![0; w_s.len()], w_s).0;
    }
    if !w_t.is_empty() {
        l += weighted_cross_entropy(logits_t, 2, &alloc::vec![1; w_t.len()], w_t).0;
    }
    l
}

#[derive(Clone, Debug, PartialEq)]
pub struct CdanLosses {
    pub l_y: f64,
    pub l_dom: f64,
    pub w_s: Vec<f64>,
    pub w_t: Vec<f64>,
}

/// Losses of one paired batch, with gradients accumulated into the model:
/// the discriminator gets ∇L_dom, everything upstream of the reversal layer
/// gets ∇L_Y − λ∇L_dom. Entropy weights are constants.
pub fn cdan_losses(model: &mut ModelBundle, xs: &Tensor3, ys: &[usize], xt: Option<&Tensor3>, lambda: f64) -> Result<CdanLosses, CdanError> {
    let k = model.classes;
    let f = model.feature_dim;
    let mut l_dom = 0.0;
    let mut run = |model: &mut ModelBundle, x: &Tensor3, d: Domain, labels: Option<&[usize]>| -> Result<(f64, Vec<f64>), CdanError> {
        let b = x.batch;
        let out = model.forward(x, d, Mode::Train)?;
        let (ly, mut dlog) = match labels {
            Some(y) => weighted_cross_entropy(&out.logits, k, y, &alloc::vec![1.0; b]),
            None => (0.0, alloc::vec![0.0; b * k]),
        };
        let w = entropy_weights(&out.p, k);
        let u = kronecker_rows(&out.h, &out.p, b, f, k);
        let dl = model.disc_forward(&u, b);
        let (ld, dd) = weighted_cross_entropy(&dl, 2, &alloc::vec![d.index(); b], &w);
        l_dom += ld;
        let du = model.disc_backward(&u, b, &dd);
        let (dh, dp) = kronecker_backward(&grl_backward(&du, lambda), &out.h, &out.p, b, f, k);
        let dz = softmax_backward(&out.p, &dp, k);
        dlog.iter_mut().zip(&dz).for_each(|(a, b)| *a += b);
        model.backward(out.cache, &dh, &dlog)?;
        Ok((ly, w))
    };
    model.zero_grad();
    let (l_y, w_s) = run(model, xs, Domain::Source, Some(ys))?;
    let w_t = match xt {
        Some(x) => run(model, x, Domain::Target, None)?.1,
        None => Vec::new(),
    };
    Ok(CdanLosses { l_y, l_dom, w_s, w_t })
}

/// Source cross-entropy with gradients accumulated (no discriminator).
pub fn erm_loss(model: &mut ModelBundle, xs: &Tensor3, ys: &[usize]) -> Result<f64, CdanError> {
    let k = model.classes;
    model.zero_grad();
    let out = model.forward(xs, Domain::Source, Mode::Train)?;
    let (l, dlog) = weighted_cross_entropy(&out.logits, k, ys, &alloc::vec![1.0; xs.batch]);
    let dh = alloc::vec![0.0; out.h.len()];
    model.backward(out.cache, &dh, &dlog)?;
    Ok(l)
}

fn check_grid(epoch_grid: &[usize], hyper: &HyperConfig) -> Result<Vec<usize>, CdanError> {
    let mut g = epoch_grid.to_vec();
    g.sort_unstable();
    g.dedup();
    if g.is_empty() || g[0] == 0 || *g.last().unwrap_or(&0) != hyper.epochs {
        return Err(CdanError::InvalidInput("epoch grid must be positive with maximum equal to E"));
    }
    if hyper.batch < 2 {
        return Err(CdanError::InvalidInput("batch size must be at least 2"));
    }
    Ok(g)
}

fn clamp_batch(b: usize, ns: usize, nt: usize) -> usize {
    let cap = if nt > 0 { ns.min(nt) } else { ns };
    if b >= cap {
        log::warn!("batch size {b} clamped to dataset size {cap}");
        cap
    } else {
        b
    }
}

fn shuffled(n: usize, seed: u64, what: &str, epoch: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng::stream(seed, rng::tag(what), epoch as u64));
    p
}

fn snapshot(model: &mut ModelBundle, epoch: usize, eval_sets: &[(&Features, Domain)], keep: bool) -> Result<Snapshot, CdanError> {
    let mut predictions = Vec::with_capacity(eval_sets.len());
    for (set, d) in eval_sets {
        predictions.push(if set.is_empty() { Vec::new() } else { model.predict(&set.all(), *d)? });
    }
    Ok(Snapshot { epoch, predictions, model: keep.then(|| model.clone()) })
}

/// Conditional adversarial training with snapshots at each epoch-grid value.
/// Each step pairs one source batch with one target batch; an epoch has
/// ceil(max(N_s, N_t)/B) steps and the smaller set is cycled.
#[allow(clippy::too_many_arguments)]
pub fn train_cdan(
    source: &Features,
    labels: &[usize],
    classes: usize,
    target: &Features,
    hyper: &HyperConfig,
    epoch_grid: &[usize],
    eval_sets: &[(&Features, Domain)],
    opts: &TrainOptions,
) -> Result<CheckpointSet, CdanError> {
    let grid = check_grid(epoch_grid, hyper)?;
    if source.is_empty() || labels.len() != source.len() || labels.iter().any(|&y| y >= classes) {
        return Err(CdanError::InvalidInput("source labels missing or out of range"));
    }
    let tshape = if target.is_empty() { source.shape } else { target.shape };
    let mut model = build_model_adapted(source.shape, tshape, classes, hyper.seed)?;
    let (ns, nt) = (source.len(), target.len());
    let b = clamp_batch(hyper.batch, ns, nt);
    let nmax = ns.max(nt);
    let adam = AdamConfig::new(hyper.lr);
    let mut snaps = Vec::with_capacity(grid.len());
    let mut log = Vec::new();
    let mut step = 0;
    for epoch in 1..=hyper.epochs {
        let ps = shuffled(ns, hyper.seed, "batches-source", epoch);
        let pt = shuffled(nt, hyper.seed, "batches-target", epoch);
        for s in 0..nmax.div_ceil(b) {
            let size = b.min(nmax - s * b);
            if size < 2 {
                continue;
            }
            let is: Vec<usize> = (0..size).map(|j| ps[(s * b + j) % ns]).collect();
            let ys: Vec<usize> = is.iter().map(|&i| labels[i]).collect();
            let xt = (nt > 0).then(|| {
                let it: Vec<usize> = (0..size).map(|j| pt[(s * b + j) % nt]).collect();
                target.batch(&it)
            });
            let l = cdan_losses(&mut model, &source.batch(&is), &ys, xt.as_ref(), hyper.lambda)?;
            if opts.log_steps {
                log.push(StepLog { step, l_y: l.l_y, l_dom: l.l_dom, grad_norm: model.store.grad_norm() });
            }
            model.adam_step(&adam);
            step += 1;
        }
        if grid.binary_search(&epoch).is_ok() {
            snaps.push(snapshot(&mut model, epoch, eval_sets, opts.keep_models)?);
        }
    }
    Ok(CheckpointSet { hyper: *hyper, snapshots: snaps, log })
}

/// Source-only training. DSBN collapses to the source branch, which is also
/// used for target predictions. When target inputs have a different shape
/// the model is built with a target-shaped identity adapter that never sees
/// target data in training.
#[allow(clippy::too_many_arguments)]
pub fn train_erm(
    source: &Features,
    labels: &[usize],
    classes: usize,
    target_shape: Shape,
    hyper: &HyperConfig,
    epoch_grid: &[usize],
    eval_sets: &[(&Features, Domain)],
    opts: &TrainOptions,
) -> Result<CheckpointSet, CdanError> {
    let grid = check_grid(epoch_grid, hyper)?;
    if source.is_empty() || labels.len() != source.len() || labels.iter().any(|&y| y >= classes) {
        return Err(CdanError::InvalidInput("source labels missing or out of range"));
    }
    let mut model = build_model_adapted(source.shape, target_shape, classes, hyper.seed)?;
    model.dsbn = false;
    let ns = source.len();
    let b = clamp_batch(hyper.batch, ns, 0);
    let adam = AdamConfig::new(hyper.lr);
    let mut snaps = Vec::with_capacity(grid.len());
    let mut log = Vec::new();
    let mut step = 0;
    for epoch in 1..=hyper.epochs {
        let ps = shuffled(ns, hyper.seed, "batches-source", epoch);
        for s in 0..ns.div_ceil(b) {
            let size = b.min(ns - s * b);
            if size < 2 {
                continue;
            }
            let is: Vec<usize> = (0..size).map(|j| ps[s * b + j]).collect();
            let ys: Vec<usize> = is.iter().map(|&i| labels[i]).collect();
            let l = erm_loss(&mut model, &source.batch(&is), &ys)?;
            if opts.log_steps {
                log.push(StepLog { step, l_y: l, l_dom: 0.0, grad_norm: model.store.grad_norm() });
            }
            model.adam_step(&adam);
            step += 1;
        }
        if grid.binary_search(&epoch).is_ok() {
            snaps.push(snapshot(&mut model, epoch, eval_sets, opts.keep_models)?);
        }
    }
    Ok(CheckpointSet { hyper: *hyper, snapshots: snaps, log })
}

/// Fold id per sample: each class is shuffled independently and dealt
/// round-robin, so assignments depend only on (seed, labels).
pub fn stratified_folds(labels: &[usize], classes: usize, k: usize, seed: u64) -> Result<Vec<usize>, CdanError> {
    if k < 2 {
        return Err(CdanError::InvalidInput("need at least 2 folds"));
    }
    let mut fold = alloc::vec![0; labels.len()];
    for c in 0..classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < k {
            return Err(CdanError::Stratification { class: c, have: idx.len(), k });
        }
        idx.shuffle(&mut rng::stream(seed, rng::tag("folds"), c as u64));
        for (j, &i) in idx.iter().enumerate() {
            fold[i] = j % k;
        }
    }
    Ok(fold)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub configs: Vec<HyperConfig>,
    /// Mean validation macro-F1 per config.
    pub scores: Vec<f64>,
    pub best: usize,
}

/// Stratified k-fold CV of source-only training over the grid (λ ignored).
/// Ties go to the lowest grid index.
pub fn kfold_cv_select<P: ParMap>(
    source: &Features,
    labels: &[usize],
    classes: usize,
    grid: &HyperGrid,
    k: usize,
    seed: u64,
    exec: &P,
) -> Result<CvResult, CdanError> {
    let folds = stratified_folds(labels, classes, k, seed)?;
    let configs = grid.configs(false, seed);
    let runs = grid.runs(false, seed);
    let epochs = grid.sorted_epochs();
    // One run per ((B, η), fold), snapshotted at every epoch value.
    let results = exec.map(runs.len() * k, |job| -> Result<Vec<f64>, CdanError> {
        let (r, f) = (job / k, job % k);
        let tr: Vec<usize> = (0..labels.len()).filter(|&i| folds[i] != f).collect();
        let va: Vec<usize> = (0..labels.len()).filter(|&i| folds[i] == f).collect();
        let (xs, ys) = (source.subset(&tr), tr.iter().map(|&i| labels[i]).collect::<Vec<_>>());
        let xv = source.subset(&va);
        let yv: Vec<usize> = va.iter().map(|&i| labels[i]).collect();
        let cs = train_erm(&xs, &ys, classes, source.shape, &runs[r], &epochs, &[(&xv, Domain::Source)], &TrainOptions::default())?;
        Ok(cs.snapshots.iter().map(|s| macro_f1(&yv, &argmax_rows(&s.predictions[0], classes), classes)).collect())
    });
    let results: Vec<Vec<f64>> = results.into_iter().collect::<Result<_, _>>()?;
    let scores: Vec<f64> = configs
        .iter()
        .map(|c| {
            let r = runs.iter().position(|q| q.batch == c.batch && q.lr == c.lr).unwrap_or(0);
            let e = epochs.iter().position(|&e| e == c.epochs).unwrap_or(0);
            (0..k).map(|f| results[r * k + f][e]).sum::<f64>() / k as f64
        })
        .collect();
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(CvResult { configs, scores, best })
}

/// Eval-mode class probabilities and argmax labels (ties to lowest class).
pub fn predict(model: &mut ModelBundle, features: &Features, domain: Domain) -> Result<(Vec<f64>, Vec<usize>), CdanError> {
    if features.shape != model.input_shape(domain) {
        let (c, l) = model.input_shape(domain);
        return Err(TensorError::ShapeMismatch { expected: (c, l), got: features.shape }.into());
    }
    let p = model.predict(&features.all(), domain)?;
    let y = argmax_rows(&p, model.classes);
    Ok((p, y))
}
