//! Task definitions, trial plans and dataset assembly.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU8, Ordering};
use serde::{Deserialize, Serialize};

use super::oracle::{class_names, subspace_rule, OracleConfig, PhaseOracle};
use super::regions::{source_region, target_region, Region};
use super::BenchError;
use crate::cdan::HyperGrid;
use crate::entdata::{gen_ghzw_dataset, gen_sep_ent_dataset, GhzwConfig, LayerKind, PartitionMode, SepEntConfig};
use crate::exec::ParMap;
use crate::qsim::{
    apply_qetu, build_hamiltonian, design_qetu_filter, emax_bound, lowest_eigenpairs, overlap_with_subspace,
    resolve_subspace, sample_raw_state, NoiseSpec, QetuDesign, SpinModel, StateVector,
};
use crate::rng::{self, tag};
use crate::shadows::IndexMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preparation {
    /// √f·(ground) + √(1−f)·(excited) superposition.
    Raw,
    /// The raw state passed through the spectral filter.
    Qetu,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinTask {
    pub model: SpinModel,
    pub n: usize,
    pub k: usize,
    pub preparation: Preparation,
    /// Excited levels beyond the ground state kept in the computed span.
    pub excited: usize,
    pub f_range: (f64, f64),
    pub gap_est: f64,
    pub qetu: QetuDesign,
    pub eig_tol: f64,
    pub oracle: OracleConfig,
}

impl SpinTask {
    pub fn new(model: SpinModel, n: usize, preparation: Preparation) -> Self {
        let (k, gap_est) = match model {
            SpinModel::Cluster => (1, 1.0),
            SpinModel::Annni => (4, 0.01),
        };
        SpinTask {
            model,
            n,
            k,
            preparation,
            excited: 40,
            f_range: (0.2, 0.4),
            gap_est,
            qetu: QetuDesign::default(),
            eig_tol: 1e-9,
            oracle: OracleConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TaskKind {
    Spin(SpinTask),
    SepEnt { source: SepEntConfig, target: SepEntConfig, k: usize },
    Ghzw { source: GhzwConfig, target: GhzwConfig, k: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub kind: TaskKind,
    /// Hardware noise on noisy-domain shots.
    pub noise: NoiseSpec,
    /// Source shots per state; `None` means exact expectation values.
    pub shots_source: Option<usize>,
    pub shots_target: usize,
}

pub const TASK_IDS: [&str; 14] = [
    "cluster-raw-1e3",
    "cluster-qetu-1e3",
    "cluster-raw-1e4",
    "cluster-qetu-1e4",
    "annni-raw-1e3",
    "annni-qetu-1e3",
    "annni-raw-1e4",
    "annni-qetu-1e4",
    "sepent-8x3fix-16x3random",
    "sepent-16x6fix-16x3random",
    "ghzw-8slocc-16slocc",
    "ghzw-16pauli-16slocc",
    "desk-cluster-qetu",
    "desk-sepent",
];

fn hardware_noise() -> NoiseSpec {
    NoiseSpec { p_depol: 0.1, p_flip: 0.01 }
}

fn sepent(n: usize, parts: usize, mode: PartitionMode, noisy: bool) -> SepEntConfig {
    SepEntConfig { n, parts, partition_mode: mode, count_per_class: 0, noisy }
}

fn ghzw(n: usize, generation: LayerKind, noisy: bool) -> GhzwConfig {
    GhzwConfig { n, generation, count_per_class: 0, noisy, slocc_bound: 10.0 }
}

impl TaskSpec {
    /// Built-in task by id. Spin-chain ids are `{cluster,annni}-{raw,qetu}-{1e3,1e4}`.
    pub fn preset(id: &str) -> Result<TaskSpec, BenchError> {
        let spin = |model, prep, shots| TaskSpec {
            id: id.to_string(),
            kind: TaskKind::Spin(SpinTask::new(model, 15, prep)),
            noise: hardware_noise(),
            shots_source: None,
            shots_target: shots,
        };
        let ent = |kind| TaskSpec { id: id.to_string(), kind, noise: hardware_noise(), shots_source: Some(500), shots_target: 500 };
        let parts: Vec<&str> = id.split('-').collect();
        Ok(match parts.as_slice() {
            [m @ ("cluster" | "annni"), p @ ("raw" | "qetu"), t @ ("1e3" | "1e4")] => {
                let model = if *m == "cluster" { SpinModel::Cluster } else { SpinModel::Annni };
                let prep = if *p == "raw" { Preparation::Raw } else { Preparation::Qetu };
                spin(model, prep, if *t == "1e3" { 1000 } else { 10_000 })
            }
            ["sepent", "8x3fix", "16x3random"] => ent(TaskKind::SepEnt {
                source: sepent(8, 3, PartitionMode::Fixed, false),
                target: sepent(16, 3, PartitionMode::Random, true),
                k: 3,
            }),
            ["sepent", "16x6fix", "16x3random"] => ent(TaskKind::SepEnt {
                source: sepent(16, 6, PartitionMode::Fixed, false),
                target: sepent(16, 3, PartitionMode::Random, true),
                k: 3,
            }),
            ["ghzw", "8slocc", "16slocc"] => ent(TaskKind::Ghzw {
                source: ghzw(8, LayerKind::Slocc, false),
                target: ghzw(16, LayerKind::Slocc, true),
                k: 3,
            }),
            ["ghzw", "16pauli", "16slocc"] => ent(TaskKind::Ghzw {
                source: ghzw(16, LayerKind::Pauli, false),
                target: ghzw(16, LayerKind::Slocc, true),
                k: 3,
            }),
            ["desk", "cluster", "qetu"] => TaskSpec {
                id: id.to_string(),
                kind: TaskKind::Spin(SpinTask::new(SpinModel::Cluster, 9, Preparation::Qetu)),
                noise: hardware_noise(),
                shots_source: None,
                shots_target: 1000,
            },
            ["desk", "sepent"] => ent(TaskKind::SepEnt {
                source: sepent(10, 4, PartitionMode::Fixed, false),
                target: sepent(10, 2, PartitionMode::Random, true),
                k: 1,
            }),
            _ => return Err(BenchError::UnknownTask(id.to_string())),
        })
    }

    pub fn classes(&self) -> usize {
        match &self.kind {
            TaskKind::Spin(s) => class_names(s.model).len(),
            _ => 2,
        }
    }

    pub fn class_names(&self) -> Vec<String> {
        match &self.kind {
            TaskKind::Spin(s) => class_names(s.model).iter().map(|s| s.to_string()).collect(),
            TaskKind::SepEnt { .. } => ["separable", "entangled"].map(String::from).to_vec(),
            TaskKind::Ghzw { .. } => ["ghz", "w"].map(String::from).to_vec(),
        }
    }

    fn noise_for(&self, noisy: bool) -> NoiseSpec {
        if noisy {
            self.noise
        } else {
            NoiseSpec::clean()
        }
    }

    /// Noise applied to source and target shots.
    pub fn domain_noise(&self) -> (NoiseSpec, NoiseSpec) {
        match &self.kind {
            TaskKind::Spin(_) => (NoiseSpec::clean(), self.noise),
            TaskKind::SepEnt { source, target, .. } => (self.noise_for(source.noisy), self.noise_for(target.noisy)),
            TaskKind::Ghzw { source, target, .. } => (self.noise_for(source.noisy), self.noise_for(target.noisy)),
        }
    }

    pub fn k(&self) -> usize {
        match &self.kind {
            TaskKind::Spin(s) => s.k,
            TaskKind::SepEnt { k, .. } | TaskKind::Ghzw { k, .. } => *k,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub n_source: usize,
    pub n_target: usize,
    pub trials: usize,
    /// Fraction of the target used as unlabeled target-train.
    pub split: f64,
    pub seed: u64,
    pub grid: HyperGrid,
    pub cv_folds: usize,
    pub kernel_grid: Vec<(f64, f64)>,
    pub cluster_restarts: usize,
    pub index_mode: IndexMode,
}

pub fn full_grid() -> HyperGrid {
    HyperGrid {
        epochs: (2..=10).map(|e| e * 100).collect(),
        batch: alloc::vec![20, 50, 80],
        lr: alloc::vec![1e-6, 5e-6, 1e-5, 5e-5, 1e-4],
        lambda: alloc::vec![0.5, 1.0, 1.5],
    }
}

pub fn desk_grid() -> HyperGrid {
    HyperGrid { epochs: alloc::vec![200, 400], batch: alloc::vec![20, 50], lr: alloc::vec![1e-5, 1e-4], lambda: alloc::vec![0.5, 1.0] }
}

pub fn kernel_grid() -> Vec<(f64, f64)> {
    let mut g = Vec::new();
    for tau in [0.01, 0.1, 1.0, 3.0] {
        for gamma in [0.01, 0.1, 1.0] {
            g.push((tau, gamma));
        }
    }
    g
}

impl Default for TrialPlan {
    fn default() -> Self {
        TrialPlan {
            n_source: 400,
            n_target: 800,
            trials: 10,
            split: 0.5,
            seed: 20_240_601,
            grid: full_grid(),
            cv_folds: 3,
            kernel_grid: kernel_grid(),
            cluster_restarts: crate::baselines::DEFAULT_RESTARTS,
            index_mode: IndexMode::Matched,
        }
    }
}

impl TrialPlan {
    /// The reduced protocol used for the desk-scale benchmarks.
    pub fn desk() -> Self {
        TrialPlan { n_source: 120, n_target: 240, trials: 5, grid: desk_grid(), ..Default::default() }
    }

    pub fn validate(&self, classes: usize) -> Result<(), BenchError> {
        if self.n_source < classes || self.n_target < 2 * classes || self.trials == 0 {
            return Err(BenchError::InvalidInput("sample counts too small for the class count"));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(BenchError::InvalidInput("split fraction must lie in (0, 1)"));
        }
        if self.grid.epochs.is_empty() || self.grid.batch.is_empty() || self.grid.lr.is_empty() || self.grid.lambda.is_empty() {
            return Err(BenchError::InvalidInput("empty hyperparameter grid"));
        }
        Ok(())
    }
}

/// One fixed state of a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub id: u64,
    pub params: Option<(f64, f64)>,
    pub generator: String,
    /// Ground-subspace overlap of the prepared state (spin chains).
    pub overlap: Option<f64>,
    pub state: StateVector,
}

const SEALED: u8 = 0;
const SCORING: u8 = 1;

/// Per-trial phase marker. Hidden labels can be read only after the trial
/// has opened its scoring phase, which happens once selection is final.
#[derive(Debug, Default)]
pub struct LeakageGuard {
    phase: AtomicU8,
}

impl LeakageGuard {
    pub fn new() -> Self {
        LeakageGuard { phase: AtomicU8::new(SEALED) }
    }

    pub fn open_scoring(&self) {
        self.phase.store(SCORING, Ordering::SeqCst);
    }

    pub fn is_open(&self) -> bool {
        self.phase.load(Ordering::SeqCst) == SCORING
    }
}

/// Target labels, readable only through a guard in its scoring phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HiddenLabels {
    labels: Vec<usize>,
}

impl HiddenLabels {
    pub fn new(labels: Vec<usize>) -> Self {
        HiddenLabels { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Labels at `idx`; a leakage error while the guard is sealed.
    pub fn reveal(&self, idx: &[usize], guard: &LeakageGuard, reader: &'static str) -> Result<Vec<usize>, BenchError> {
        if !guard.is_open() {
            log::error!("hidden target labels read by {reader} before scoring");
            return Err(BenchError::Leakage(reader));
        }
        Ok(idx.iter().map(|&i| self.labels[i]).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub task: TaskSpec,
    pub plan: TrialPlan,
    pub classes: usize,
    pub class_names: Vec<String>,
    pub source: Vec<SamplePoint>,
    pub source_labels: Vec<usize>,
    pub target: Vec<SamplePoint>,
    pub target_labels: HiddenLabels,
    /// Oracle draws rejected during class balancing (abstentions and
    /// overfull classes).
    pub rejected: usize,
}

/// Class quotas for `count` samples over the classes present in `pilot`.
/// A class is present when it makes up at least 5% of the pilot labels.
fn class_quotas(pilot: &[usize], classes: usize, count: usize) -> Vec<usize> {
    let mut freq = alloc::vec![0usize; classes];
    for &c in pilot {
        freq[c] += 1;
    }
    let present: Vec<usize> = (0..classes).filter(|&c| freq[c] * 20 >= pilot.len().max(1)).collect();
    let mut q = alloc::vec![0usize; classes];
    for (j, &c) in present.iter().enumerate() {
        q[c] = count / present.len() + usize::from(j < count % present.len());
    }
    q
}

/// Class-balanced points from `region`, labeled by the oracle. Labels are
/// computed in parallel chunks; abstentions and draws for full classes are
/// rejected. Returns points, labels and the rejection count.
pub fn balanced_points<P: ParMap>(
    region: &Region,
    oracle: &PhaseOracle,
    count: usize,
    seed: u64,
    exec: &P,
) -> Result<(Vec<(f64, f64)>, Vec<usize>, usize), BenchError> {
    let classes = oracle.classes();
    let mut g = rng::from_seed(seed);
    let chunk = count.max(16);
    let budget = 200 * count.max(1);
    let mut drawn = 0usize;
    let mut pool: Vec<((f64, f64), Option<usize>)> = Vec::new();
    let label_chunk = |pts: Vec<(f64, f64)>| -> Result<Vec<((f64, f64), Option<usize>)>, BenchError> {
        let labels = exec.map(pts.len(), |i| oracle.label(pts[i]));
        pts.into_iter().zip(labels).map(|(p, l)| Ok((p, l?))).collect()
    };
    let pilot = region.sample(chunk, &mut g)?;
    drawn += chunk;
    pool.extend(label_chunk(pilot)?);
    let pilot_labels: Vec<usize> = pool.iter().filter_map(|(_, l)| *l).collect();
    if pilot_labels.is_empty() {
        return Err(BenchError::RejectionBudget("oracle abstained on every pilot draw"));
    }
    let quotas = class_quotas(&pilot_labels, classes, count);
    let mut have = alloc::vec![0usize; classes];
    let mut points = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    let mut rejected = 0;
    let mut cursor = 0;
    while points.len() < count {
        if cursor == pool.len() {
            if drawn >= budget {
                return Err(BenchError::RejectionBudget("class quotas not filled within the draw budget"));
            }
            let more = region.sample(chunk, &mut g)?;
            drawn += chunk;
            pool.extend(label_chunk(more)?);
        }
        let (p, l) = pool[cursor];
        cursor += 1;
        match l {
            Some(c) if have[c] < quotas[c] => {
                have[c] += 1;
                points.push(p);
                labels.push(c);
            }
            Some(_) => rejected += 1,
            None => {
                log::debug!("redrawing abstained point {p:?}");
                rejected += 1;
            }
        }
    }
    Ok((points, labels, rejected))
}

/// Prepare the imperfect target state at `p`, returning it with its
/// ground-subspace overlap.
pub fn prepare_spin_state(
    task: &SpinTask,
    p: (f64, f64),
    class: usize,
    rng_: &mut rng::Rng,
) -> Result<(StateVector, f64), BenchError> {
    let h = build_hamiltonian(task.model, task.n, p)?;
    let eigs = lowest_eigenpairs(&h, task.excited + 1, task.eig_tol)?;
    let sub = resolve_subspace(&eigs, subspace_rule(task.model, class))?;
    let (raw, _) = sample_raw_state(&eigs, &sub, task.f_range, rng_)?;
    let state = match task.preparation {
        Preparation::Raw => raw,
        Preparation::Qetu => {
            let e0 = eigs.energies[0];
            let filter = design_qetu_filter(task.gap_est, e0, emax_bound(task.model, task.n, p), &task.qetu)?;
            apply_qetu(&raw, &eigs, &filter)?
        }
    };
    let overlap = overlap_with_subspace(&state, &eigs, &sub);
    Ok((state, overlap))
}

fn clean_ground_state(task: &SpinTask, p: (f64, f64)) -> Result<StateVector, BenchError> {
    let h = build_hamiltonian(task.model, task.n, p)?;
    Ok(lowest_eigenpairs(&h, 1, task.eig_tol)?.state(0))
}

fn spin_manifest<P: ParMap>(task: &TaskSpec, spin: &SpinTask, plan: &TrialPlan, exec: &P) -> Result<DatasetManifest, BenchError> {
    let oracle = PhaseOracle::calibrate(spin.model, spin.oracle.clone())?;
    let seed = plan.seed;
    let (sp, sl, r1) = balanced_points(&source_region(spin.model), &oracle, plan.n_source, rng::derive_seed(seed, &[tag("source-points")]), exec)?;
    let (tp, tl, r2) = balanced_points(&target_region(spin.model), &oracle, plan.n_target, rng::derive_seed(seed, &[tag("target-points")]), exec)?;
    let source = exec.map(sp.len(), |i| -> Result<SamplePoint, BenchError> {
        let state = clean_ground_state(spin, sp[i]).map_err(|e| e.at("source", i))?;
        Ok(SamplePoint { id: i as u64, params: Some(sp[i]), generator: "ground".into(), overlap: None, state })
    });
    let target = exec.map(tp.len(), |i| -> Result<SamplePoint, BenchError> {
        let mut g = rng::stream(seed, tag("target-states"), i as u64);
        let (state, f) = prepare_spin_state(spin, tp[i], tl[i], &mut g).map_err(|e| e.at("target", i))?;
        let generator = match spin.preparation {
            Preparation::Raw => "raw",
            Preparation::Qetu => "qetu",
        };
        Ok(SamplePoint { id: i as u64, params: Some(tp[i]), generator: generator.into(), overlap: Some(f), state })
    });
    Ok(DatasetManifest {
        task: task.clone(),
        plan: plan.clone(),
        classes: task.classes(),
        class_names: task.class_names(),
        source: source.into_iter().collect::<Result<_, _>>()?,
        source_labels: sl,
        target: target.into_iter().collect::<Result<_, _>>()?,
        target_labels: HiddenLabels::new(tl),
        rejected: r1 + r2,
    })
}

fn ent_points(samples: Vec<crate::entdata::EntSample>) -> (Vec<SamplePoint>, Vec<usize>) {
    samples
        .into_iter()
        .map(|s| {
            let c = s.class;
            (SamplePoint { id: s.id, params: None, generator: s.generator, overlap: None, state: s.state }, c)
        })
        .unzip()
}

/// Assemble the fixed states of a task. States depend only on the task and
/// the plan seed; shots are drawn per trial.
pub fn assemble_task<P: ParMap>(task: &TaskSpec, plan: &TrialPlan, exec: &P) -> Result<DatasetManifest, BenchError> {
    let classes = task.classes();
    plan.validate(classes)?;
    if task.k() == 0 {
        return Err(BenchError::InvalidInput("feature range k must be positive"));
    }
    let (ns, nt) = (plan.n_source / 2, plan.n_target / 2);
    let (source, sl, target, tl) = match &task.kind {
        TaskKind::Spin(spin) => return spin_manifest(task, spin, plan, exec),
        TaskKind::SepEnt { source, target, .. } => {
            let s = gen_sep_ent_dataset(&SepEntConfig { count_per_class: ns, ..source.clone() }, rng::derive_seed(plan.seed, &[tag("source-states")]))?;
            let t = gen_sep_ent_dataset(&SepEntConfig { count_per_class: nt, ..target.clone() }, rng::derive_seed(plan.seed, &[tag("target-states")]))?;
            let (s, sl) = ent_points(s);
            let (t, tl) = ent_points(t);
            (s, sl, t, tl)
        }
        TaskKind::Ghzw { source, target, .. } => {
            let s = gen_ghzw_dataset(&GhzwConfig { count_per_class: ns, ..source.clone() }, rng::derive_seed(plan.seed, &[tag("source-states")]))?;
            let t = gen_ghzw_dataset(&GhzwConfig { count_per_class: nt, ..target.clone() }, rng::derive_seed(plan.seed, &[tag("target-states")]))?;
            let (s, sl) = ent_points(s);
            let (t, tl) = ent_points(t);
            (s, sl, t, tl)
        }
    };
    if plan.n_source % 2 == 1 || plan.n_target % 2 == 1 {
        log::warn!("odd sample count rounded down to a balanced two-class set");
    }
    Ok(DatasetManifest {
        task: task.clone(),
        plan: plan.clone(),
        classes,
        class_names: task.class_names(),
        source,
        source_labels: sl,
        target,
        target_labels: HiddenLabels::new(tl),
        rejected: 0,
    })
}

impl DatasetManifest {
    /// Label histogram of the source set.
    pub fn source_counts(&self) -> Vec<usize> {
        let mut c = alloc::vec![0; self.classes];
        for &y in &self.source_labels {
            c[y] += 1;
        }
        c
    }

    pub fn describe(&self) -> String {
        format!("{}: {} source, {} target, {} classes", self.task.id, self.source.len(), self.target.len(), self.classes)
    }
}
