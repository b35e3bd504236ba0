//! One trial of the protocol: split, shots, features, training, selection
//! and scoring on target-unseen.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::metrics::{aggregate, argmax_rows, macro_f1, Summary};
use super::task::{DatasetManifest, LeakageGuard};
use super::BenchError;
use crate::baselines::{clustering_candidates, default_pca_dims, relabel_to_truth, ClusterMethod, ClusterSettings};
use crate::cdan::{kfold_cv_select, train_cdan, train_erm, CheckpointSet, Features, HyperConfig, TrainOptions};
use crate::exec::ParMap;
use crate::rng::{self, tag};
use crate::select::{select_model, CandidatePredictions, Criterion};
use crate::qsim::NoiseSpec;
use crate::shadows::{feature_map_exact, feature_map_phi1k, sample_shadow, FeatureTensor, Provenance, ShadowRecord};
use crate::tensornn::Domain;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Uda,
    Erm,
    Cluster(ClusterMethod),
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Uda => "uda",
            Method::Erm => "erm",
            Method::Cluster(m) => m.name(),
        }
    }
}

impl core::str::FromStr for Method {
    type Err = &'static str;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uda" => Ok(Method::Uda),
            "erm" => Ok(Method::Erm),
            other => other.parse().map(Method::Cluster).map_err(|_| "method must be uda, erm, kkmeans, spectral or pca"),
        }
    }
}

/// The target split of one trial.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSplit {
    pub train: Vec<usize>,
    pub unseen: Vec<usize>,
}

/// Random split of 0..n with ⌊split·n⌉ train indices, each half sorted.
pub fn split_target(n: usize, split: f64, seed: u64, trial: usize) -> TargetSplit {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, tag("split"), trial as u64));
    let cut = ((split * n as f64).round() as usize).clamp(1, n.saturating_sub(1));
    let mut train = idx[..cut].to_vec();
    let mut unseen = idx[cut..].to_vec();
    train.sort_unstable();
    unseen.sort_unstable();
    TargetSplit { train, unseen }
}

/// Per-trial inputs derived from the manifest: shots and features.
#[derive(Clone, Debug)]
pub struct TrialData {
    pub trial: usize,
    pub split: TargetSplit,
    pub source: Features,
    pub target: Features,
    pub target_records: Vec<ShadowRecord>,
}

/// The shadows of one trial. `source` is `None` when source features are exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialShadows {
    pub trial: usize,
    pub source: Option<Vec<ShadowRecord>>,
    pub target: Vec<ShadowRecord>,
}

fn shot_seed(seed: u64, domain: &str, trial: usize, i: usize) -> u64 {
    rng::derive_seed(seed, &[tag(domain), trial as u64, i as u64])
}

fn to_features(ts: Vec<FeatureTensor>) -> Result<Features, BenchError> {
    let shape = ts.first().map(|t| (t.channels, t.spatial)).ok_or(BenchError::InvalidInput("empty dataset"))?;
    Ok(Features::new(shape, ts.iter().map(FeatureTensor::channel_major).collect())?)
}

/// Provenance of the shadow of state `i` of the source (`target = false`)
/// or target set in `trial`.
pub fn shot_provenance(m: &DatasetManifest, target: bool, trial: usize, i: usize) -> Provenance {
    let (ns, nt) = m.task.domain_noise();
    let (points, noise, domain) = if target { (&m.target, nt, "target-shots") } else { (&m.source, ns, "source-shots") };
    Provenance { state_id: points[i].id, p_depol: noise.p_depol, p_flip: noise.p_flip, seed: shot_seed(m.plan.seed, domain, trial, i) }
}

fn draw(m: &DatasetManifest, target: bool, shots: usize, trial: usize, i: usize) -> ShadowRecord {
    let p = shot_provenance(m, target, trial, i);
    let points = if target { &m.target } else { &m.source };
    let mut r = sample_shadow(&points[i].state, shots, NoiseSpec { p_depol: p.p_depol, p_flip: p.p_flip }, &mut rng::from_seed(p.seed));
    r.provenance = p;
    r
}

/// Draw the trial's shadows from the fixed states.
pub fn trial_shadows<P: ParMap>(m: &DatasetManifest, trial: usize, exec: &P) -> Result<TrialShadows, BenchError> {
    if trial >= m.plan.trials {
        return Err(BenchError::InvalidInput("trial index beyond the plan"));
    }
    let source = m.task.shots_source.map(|t| exec.map(m.source.len(), |i| draw(m, false, t, trial, i)));
    let target = exec.map(m.target.len(), |i| draw(m, true, m.task.shots_target, trial, i));
    Ok(TrialShadows { trial, source, target })
}

/// Features of one trial. Source features are exact when the shadows carry
/// no source records.
pub fn trial_features<P: ParMap>(m: &DatasetManifest, sh: &TrialShadows, exec: &P) -> Result<TrialData, BenchError> {
    let k = m.task.k();
    if sh.target.len() != m.target.len() || sh.source.as_ref().is_some_and(|s| s.len() != m.source.len()) {
        return Err(BenchError::InvalidInput("shadow count does not match the manifest"));
    }
    let src = exec.map(m.source.len(), |i| {
        match &sh.source {
            None => feature_map_exact(&m.source[i].state, k),
            Some(r) => feature_map_phi1k(&r[i], k),
        }
        .map_err(|e| BenchError::from(e).at("source", i))
    });
    let tf = exec.map(sh.target.len(), |i| feature_map_phi1k(&sh.target[i], k).map_err(|e| BenchError::from(e).at("target", i)));
    Ok(TrialData {
        trial: sh.trial,
        split: split_target(m.target.len(), m.plan.split, m.plan.seed, sh.trial),
        source: to_features(src.into_iter().collect::<Result<_, _>>()?)?,
        target: to_features(tf.into_iter().collect::<Result<_, _>>()?)?,
        target_records: sh.target.clone(),
    })
}

/// Draw the trial's shadows and compute features.
pub fn trial_data<P: ParMap>(m: &DatasetManifest, trial: usize, exec: &P) -> Result<TrialData, BenchError> {
    trial_features(m, &trial_shadows(m, trial, exec)?, exec)
}

/// What won selection for one row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selected {
    pub hyper: Option<HyperConfig>,
    pub tau: Option<f64>,
    pub gamma: Option<f64>,
    /// Selection score (criterion value, or mean CV macro-F1 for ERM).
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    /// `erm`, `uda-ensv`, `uda-infomax`, or `<cluster method>-<criterion>`.
    pub method: String,
    pub selected: Selected,
    pub f1_unseen: f64,
    /// Target indices of the unseen half and their predicted classes.
    pub unseen: Vec<usize>,
    pub predictions: Vec<usize>,
}

/// One trained or clustered candidate: its target-train predictions (the
/// selection input) and its raw labels on target-unseen (class ids, or
/// cluster ids for the clustering baselines).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub origin: Selected,
    pub pool: CandidatePredictions,
    pub unseen_labels: Vec<usize>,
}

/// Every candidate of one method in one trial. Contains no target labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub trial: usize,
    pub method: Method,
    pub unseen: Vec<usize>,
    pub candidates: Vec<Candidate>,
}

/// A selected candidate, before scoring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Choice {
    pub trial: usize,
    pub method: Method,
    pub row: String,
    pub candidate: usize,
    pub selected: Selected,
}

fn row_name(m: Method, c: Option<Criterion>) -> String {
    match c {
        None => m.name().to_string(),
        Some(Criterion::EnsV) => alloc::format!("{}-ensv", m.name()),
        Some(Criterion::InfoMax) => alloc::format!("{}-infomax", m.name()),
    }
}

fn trial_seed(m: &DatasetManifest, method: &str, trial: usize) -> u64 {
    rng::derive_seed(m.plan.seed, &[tag(method), trial as u64])
}

/// One candidate per (configuration, epoch snapshot).
fn uda_candidates<P: ParMap>(m: &DatasetManifest, d: &TrialData, exec: &P) -> Result<Vec<Candidate>, BenchError> {
    let runs = m.plan.grid.runs(true, trial_seed(m, "uda", d.trial));
    let epochs = m.plan.grid.sorted_epochs();
    let xt = d.target.subset(&d.split.train);
    let xu = d.target.subset(&d.split.unseen);
    let opts = TrainOptions::default();
    let sets = exec.map(runs.len(), |r| {
        train_cdan(&d.source, &m.source_labels, m.classes, &xt, &runs[r], &epochs, &[(&xt, Domain::Target), (&xu, Domain::Target)], &opts)
    });
    let sets: Vec<CheckpointSet> = sets.into_iter().collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for (ci, cs) in sets.iter().enumerate() {
        for s in &cs.snapshots {
            let mut hyper = cs.hyper;
            hyper.epochs = s.epoch;
            out.push(Candidate {
                origin: Selected { hyper: Some(hyper), tau: None, gamma: None, score: 0.0 },
                pool: CandidatePredictions::new(ci, s.epoch, m.classes, s.predictions[0].clone())?,
                unseen_labels: argmax_rows(&s.predictions[1], m.classes),
            });
        }
    }
    Ok(out)
}

/// K-fold CV on the source picks the configuration; the refit is the single
/// candidate. Its CV score is carried as the origin score.
fn erm_candidates<P: ParMap>(m: &DatasetManifest, d: &TrialData, exec: &P) -> Result<Vec<Candidate>, BenchError> {
    let cv = kfold_cv_select(&d.source, &m.source_labels, m.classes, &m.plan.grid, m.plan.cv_folds, trial_seed(m, "erm", d.trial), exec)?;
    let best = cv.configs[cv.best];
    let xt = d.target.subset(&d.split.train);
    let xu = d.target.subset(&d.split.unseen);
    let evals = [(&xt, Domain::Target), (&xu, Domain::Target)];
    let refit = train_erm(&d.source, &m.source_labels, m.classes, d.target.shape, &best, &[best.epochs], &evals, &TrainOptions::default())?;
    let snap = &refit.snapshots[0];
    Ok(alloc::vec![Candidate {
        origin: Selected { hyper: Some(best), tau: None, gamma: None, score: cv.scores[cv.best] },
        pool: CandidatePredictions::new(0, best.epochs, m.classes, snap.predictions[0].clone())?,
        unseen_labels: argmax_rows(&snap.predictions[1], m.classes),
    }])
}

/// Clustering runs on the whole target set (transductive); the pool holds
/// one-hot cluster ids of the target-train rows.
fn cluster_candidates<P: ParMap>(m: &DatasetManifest, d: &TrialData, method: ClusterMethod, exec: &P) -> Result<Vec<Candidate>, BenchError> {
    let settings = ClusterSettings {
        classes: m.classes,
        seed: trial_seed(m, method.name(), d.trial),
        restarts: m.plan.cluster_restarts,
        pca_dims: default_pca_dims(m.classes),
        mode: m.plan.index_mode,
    };
    let cands = clustering_candidates(&d.target_records, &d.target.rows, &m.plan.kernel_grid, &[method], &settings, exec)?;
    cands
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let train: Vec<usize> = d.split.train.iter().map(|&j| c.assignment.labels[j]).collect();
            Ok(Candidate {
                origin: Selected { hyper: None, tau: Some(c.tau), gamma: Some(c.gamma), score: 0.0 },
                pool: CandidatePredictions::one_hot(i, &train, c.assignment.clusters)?,
                unseen_labels: d.split.unseen.iter().map(|&j| c.assignment.labels[j]).collect(),
            })
        })
        .collect()
}

/// Train or cluster every candidate of `method` for one trial. Uses source
/// labels and unlabeled target features only.
pub fn method_candidates<P: ParMap>(m: &DatasetManifest, d: &TrialData, method: Method, exec: &P) -> Result<CandidateSet, BenchError> {
    if m.source_labels.len() != m.source.len() || m.target_labels.len() != m.target.len() {
        return Err(BenchError::InvalidInput("manifest label counts do not match the states"));
    }
    log::info!("{}: trial {}, method {}", m.task.id, d.trial, method.name());
    let candidates = match method {
        Method::Uda => uda_candidates(m, d, exec)?,
        Method::Erm => erm_candidates(m, d, exec)?,
        Method::Cluster(c) => cluster_candidates(m, d, c, exec)?,
    };
    Ok(CandidateSet { trial: d.trial, method, unseen: d.split.unseen.clone(), candidates })
}

/// Label-free selection: one choice per criterion, or the single ERM refit.
pub fn select_candidates(set: &CandidateSet, criteria: &[Criterion]) -> Result<Vec<Choice>, BenchError> {
    if set.candidates.is_empty() {
        return Err(BenchError::InvalidInput("empty candidate set"));
    }
    if set.method == Method::Erm {
        let c = &set.candidates[0];
        return Ok(alloc::vec![Choice { trial: set.trial, method: set.method, row: row_name(Method::Erm, None), candidate: 0, selected: c.origin.clone() }]);
    }
    let pool: Vec<CandidatePredictions> = set.candidates.iter().map(|c| c.pool.clone()).collect();
    criteria
        .iter()
        .map(|&crit| {
            let rep = select_model(&pool, crit)?;
            let mut selected = set.candidates[rep.winner].origin.clone();
            selected.score = rep.scores[rep.winner];
            Ok(Choice { trial: set.trial, method: set.method, row: row_name(set.method, Some(crit)), candidate: rep.winner, selected })
        })
        .collect()
}

/// Score a choice on target-unseen. Clustering choices are first mapped to
/// classes with the unseen labels. Needs an open guard.
pub fn score_choice(m: &DatasetManifest, set: &CandidateSet, choice: &Choice, guard: &LeakageGuard) -> Result<TrialRow, BenchError> {
    let cand = set.candidates.get(choice.candidate).ok_or(BenchError::InvalidInput("choice names a missing candidate"))?;
    if choice.trial != set.trial || choice.method != set.method {
        return Err(BenchError::InvalidInput("choice does not belong to this candidate set"));
    }
    let truth = m.target_labels.reveal(&set.unseen, guard, "scoring")?;
    let (pred, f1) = match set.method {
        Method::Cluster(_) => relabel_to_truth(&cand.unseen_labels, &truth, cand.pool.classes, m.classes),
        _ => (cand.unseen_labels.clone(), macro_f1(&truth, &cand.unseen_labels, m.classes)),
    };
    Ok(TrialRow { trial: set.trial, method: choice.row.clone(), selected: choice.selected.clone(), f1_unseen: f1, unseen: set.unseen.clone(), predictions: pred })
}

/// Rows of one trial for each requested method. UDA and the clustering
/// baselines report one row per criterion from a single candidate pool.
/// Hidden labels are sealed until every selection is made.
pub fn run_trial<P: ParMap>(
    m: &DatasetManifest,
    trial: usize,
    methods: &[Method],
    criteria: &[Criterion],
    exec: &P,
) -> Result<Vec<TrialRow>, BenchError> {
    let d = trial_data(m, trial, exec)?;
    let mut picked = Vec::new();
    for &method in methods {
        let set = method_candidates(m, &d, method, exec)?;
        let choices = select_candidates(&set, criteria)?;
        picked.push((set, choices));
    }
    let guard = LeakageGuard::new();
    guard.open_scoring();
    let mut rows = Vec::new();
    for (set, choices) in &picked {
        for c in choices {
            rows.push(score_choice(m, set, c, &guard)?);
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub summary: Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub task: String,
    pub seed: u64,
    pub rows: Vec<TrialRow>,
    /// Per-method aggregates in first-appearance order.
    pub summaries: Vec<MethodSummary>,
}

impl TrialReport {
    pub fn from_rows(task: &str, seed: u64, mut rows: Vec<TrialRow>) -> Self {
        rows.sort_by(|a, b| a.trial.cmp(&b.trial));
        let mut names: Vec<String> = Vec::new();
        for r in &rows {
            if !names.contains(&r.method) {
                names.push(r.method.clone());
            }
        }
        let summaries = names
            .into_iter()
            .map(|method| {
                let v: Vec<f64> = rows.iter().filter(|r| r.method == method).map(|r| r.f1_unseen).collect();
                MethodSummary { summary: aggregate(&v), method }
            })
            .collect();
        TrialReport { task: task.to_string(), seed, rows, summaries }
    }

    pub fn summary(&self, method: &str) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.method == method).map(|s| &s.summary)
    }

    /// True when every summary equals the aggregate of its rows.
    pub fn is_consistent(&self) -> bool {
        self.summaries.iter().all(|s| {
            let v: Vec<f64> = self.rows.iter().filter(|r| r.method == s.method).map(|r| r.f1_unseen).collect();
            !v.is_empty() && aggregate(&v) == s.summary
        })
    }

    /// Table rows `method  median  mean ± std`.
    pub fn table(&self) -> String {
        let mut out = alloc::format!("{}\n{:<24}{:>8}{:>18}\n", self.task, "method", "median", "mean ± std");
        for s in &self.summaries {
            out.push_str(&alloc::format!("{:<24}{:>8.3}{:>11.3} ± {:.3}\n", s.method, s.summary.median, s.summary.mean, s.summary.std));
        }
        out
    }
}

/// All trials and methods, in trial order.
pub fn run_trials<P: ParMap>(m: &DatasetManifest, methods: &[Method], criteria: &[Criterion], exec: &P) -> Result<TrialReport, BenchError> {
    let mut rows = Vec::new();
    for t in 0..m.plan.trials {
        rows.extend(run_trial(m, t, methods, criteria, exec)?);
    }
    Ok(TrialReport::from_rows(&m.task.id, m.plan.seed, rows))
}

/// One CSV line per unseen target point: trial, method, id, parameters,
/// predicted class.
pub fn prediction_grid_csv(m: &DatasetManifest, report: &TrialReport) -> String {
    let mut out = String::from("trial,method,target_id,x,y,predicted\n");
    for r in &report.rows {
        for (&i, &p) in r.unseen.iter().zip(&r.predictions) {
            let (x, y) = m.target[i].params.unwrap_or((f64::NAN, f64::NAN));
            out.push_str(&alloc::format!("{},{},{},{:?},{:?},{}\n", r.trial, r.method, m.target[i].id, x, y, p));
        }
    }
    out
}
