//! Label-free model selection: InfoMax scoring and EnsV virtual-teacher
//! agreement over a pool of candidate prediction matrices.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::bench::{argmax_rows, macro_f1};
use crate::cdan::{CheckpointSet, HyperConfig};
use crate::tensornn::ModelBundle;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SelectError {
    #[error("empty candidate pool")]
    EmptyPool,
    #[error("candidate {0}: {1}")]
    Invalid(usize, &'static str),
}

/// One candidate's class probabilities on the target-train set. `config`
/// indexes the grid the candidate came from; `epoch` is 0 for candidates
/// without an epoch axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidatePredictions {
    pub config: usize,
    pub epoch: usize,
    pub rows: usize,
    pub classes: usize,
    pub probs: Vec<f64>,
}

impl CandidatePredictions {
    pub fn new(config: usize, epoch: usize, classes: usize, probs: Vec<f64>) -> Result<Self, SelectError> {
        if classes == 0 || probs.len() % classes != 0 || probs.is_empty() {
            return Err(SelectError::Invalid(config, "probability matrix shape"));
        }
        let rows = probs.len() / classes;
        for r in probs.chunks(classes) {
            if r.iter().any(|&v| !(0.0..=1.0 + 1e-9).contains(&v)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
                return Err(SelectError::Invalid(config, "rows must be probability vectors"));
            }
        }
        Ok(CandidatePredictions { config, epoch, rows, classes, probs })
    }

    /// One-hot rows from hard labels.
    pub fn one_hot(config: usize, labels: &[usize], classes: usize) -> Result<Self, SelectError> {
        let mut p = alloc::vec![0.0; labels.len() * classes];
        for (i, &y) in labels.iter().enumerate() {
            if y >= classes {
                return Err(SelectError::Invalid(config, "label out of range"));
            }
            p[i * classes + y] = 1.0;
        }
        Self::new(config, 0, classes, p)
    }

    pub fn labels(&self) -> Vec<usize> {
        argmax_rows(&self.probs, self.classes)
    }
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

/// H(mean row) − mean H(row), in nats.
pub fn infomax_score(p: &[f64], classes: usize) -> f64 {
    let rows = p.len() / classes;
    if rows == 0 {
        return 0.0;
    }
    let mut mean = alloc::vec![0.0; classes];
    let mut cond = 0.0;
    for r in p.chunks(classes) {
        mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
        cond += entropy(r);
    }
    mean.iter_mut().for_each(|m| *m /= rows as f64);
    entropy(&mean) - cond / rows as f64
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Agreement {
    /// Macro-F1 of candidate argmax labels against teacher argmax labels.
    #[default]
    MacroF1,
    /// Mean row inner product ⟨p_m, p̄⟩.
    InnerProduct,
}

fn check_pool(pool: &[CandidatePredictions]) -> Result<(usize, usize), SelectError> {
    let first = pool.first().ok_or(SelectError::EmptyPool)?;
    for (i, c) in pool.iter().enumerate() {
        if c.rows != first.rows || c.classes != first.classes {
            return Err(SelectError::Invalid(i, "inconsistent prediction shape"));
        }
    }
    Ok((first.rows, first.classes))
}

/// Averaged teacher p̄ over the pool.
pub fn ensemble_teacher(pool: &[CandidatePredictions]) -> Result<Vec<f64>, SelectError> {
    let (rows, k) = check_pool(pool)?;
    let mut t = alloc::vec![0.0; rows * k];
    for c in pool {
        t.iter_mut().zip(&c.probs).for_each(|(a, b)| *a += b);
    }
    let m = pool.len() as f64;
    t.iter_mut().for_each(|a| *a /= m);
    Ok(t)
}

pub fn ensv_scores(pool: &[CandidatePredictions], agreement: Agreement) -> Result<Vec<f64>, SelectError> {
    let (rows, k) = check_pool(pool)?;
    let teacher = ensemble_teacher(pool)?;
    Ok(match agreement {
        Agreement::MacroF1 => {
            let tl = argmax_rows(&teacher, k);
            pool.iter().map(|c| macro_f1(&tl, &c.labels(), k)).collect()
        }
        Agreement::InnerProduct => pool
            .iter()
            .map(|c| c.probs.iter().zip(&teacher).map(|(a, b)| a * b).sum::<f64>() / rows as f64)
            .collect(),
    })
}

fn argmax_first(s: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in s.iter().enumerate() {
        if v > s[best] {
            best = i;
        }
    }
    best
}

/// Index of the winning candidate and the score table. Ties go to the
/// lowest index.
pub fn ensv_select(pool: &[CandidatePredictions], agreement: Agreement) -> Result<(usize, Vec<f64>), SelectError> {
    let s = ensv_scores(pool, agreement)?;
    Ok((argmax_first(&s), s))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    InfoMax,
    EnsV,
}

impl core::str::FromStr for Criterion {
    type Err = &'static str;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "infomax" => Ok(Criterion::InfoMax),
            "ensv" => Ok(Criterion::EnsV),
            _ => Err("criterion must be infomax or ensv"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub criterion: Criterion,
    pub winner: usize,
    pub config: usize,
    pub epoch: usize,
    pub scores: Vec<f64>,
    /// Candidate indices by descending score, stable on ties.
    pub ranking: Vec<usize>,
}

pub fn score_pool(pool: &[CandidatePredictions], criterion: Criterion) -> Result<Vec<f64>, SelectError> {
    check_pool(pool)?;
    match criterion {
        Criterion::InfoMax => Ok(pool.iter().map(|c| infomax_score(&c.probs, c.classes)).collect()),
        Criterion::EnsV => ensv_scores(pool, Agreement::MacroF1),
    }
}

pub fn select_model(pool: &[CandidatePredictions], criterion: Criterion) -> Result<SelectionReport, SelectError> {
    let scores = score_pool(pool, criterion)?;
    let winner = argmax_first(&scores);
    let mut ranking: Vec<usize> = (0..scores.len()).collect();
    ranking.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    Ok(SelectionReport { criterion, winner, config: pool[winner].config, epoch: pool[winner].epoch, scores, ranking })
}

/// Candidate pool of every (config, snapshot) pair, reading evaluation set
/// `eval` from each snapshot. Config ids are positions in `sets`.
pub fn pool_from_checkpoints(sets: &[CheckpointSet], eval: usize, classes: usize) -> Result<Vec<CandidatePredictions>, SelectError> {
    let mut pool = Vec::new();
    for (ci, cs) in sets.iter().enumerate() {
        for s in &cs.snapshots {
            let p = s.predictions.get(eval).ok_or(SelectError::Invalid(ci, "missing evaluation set"))?;
            pool.push(CandidatePredictions::new(ci, s.epoch, classes, p.clone())?);
        }
    }
    Ok(pool)
}

/// The winning configuration (with epochs set to the winning snapshot) and
/// its model when the snapshot kept one.
pub fn winner_of<'a>(sets: &'a [CheckpointSet], report: &SelectionReport) -> Option<(HyperConfig, Option<&'a ModelBundle>)> {
    let cs = sets.get(report.config)?;
    let snap = cs.snapshots.iter().find(|s| s.epoch == report.epoch)?;
    let mut h = cs.hyper;
    h.epochs = report.epoch;
    Some((h, snap.model.as_ref()))
}
