//! Experiment protocol: regions, label oracles, dataset assembly, trials and metrics.

mod metrics;
mod oracle;
mod regions;
mod task;
mod trial;

use alloc::boxed::Box;
use alloc::string::{String, ToString};

pub use metrics::{aggregate, argmax_rows, macro_f1, Summary};
pub use oracle::{
    class_names, label_points, order_parameters, subspace_rule, OracleConfig, OrderParameters, PhaseOracle,
    ANNNI_CLASSES, CLUSTER_CLASSES,
};
pub use regions::{source_region, target_region, Region};
pub use task::{
    assemble_task, balanced_points, desk_grid, full_grid, kernel_grid, prepare_spin_state, DatasetManifest,
    HiddenLabels, LeakageGuard, Preparation, SamplePoint, SpinTask, TaskKind, TaskSpec, TrialPlan, TASK_IDS,
};
pub use trial::{
    method_candidates, prediction_grid_csv, run_trial, run_trials, score_choice, select_candidates, shot_provenance, split_target,
    trial_data, trial_features, trial_shadows, Candidate, CandidateSet, Choice, Method, MethodSummary, Selected,
    TargetSplit, TrialData, TrialReport, TrialRow, TrialShadows,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BenchError {
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("unknown task id {0}")]
    UnknownTask(String),
    #[error("rejection budget exhausted: {0}")]
    RejectionBudget(&'static str),
    #[error("hidden target labels read before scoring ({0})")]
    Leakage(&'static str),
    #[error("{stage} sample {index}: {source}")]
    Sample { stage: &'static str, index: usize, source: Box<BenchError> },
    #[error(transparent)]
    Qsim(#[from] crate::qsim::QsimError),
    #[error(transparent)]
    Ent(#[from] crate::entdata::EntError),
    #[error(transparent)]
    Cdan(#[from] crate::cdan::CdanError),
    #[error(transparent)]
    Select(#[from] crate::select::SelectError),
    #[error(transparent)]
    Baseline(#[from] crate::baselines::BaselineError),
    #[error("shadow error: {0}")]
    Shadow(String),
}

impl From<crate::shadows::ShadowError> for BenchError {
    fn from(e: crate::shadows::ShadowError) -> Self {
        BenchError::Shadow(e.to_string())
    }
}

impl BenchError {
    /// Attach sample provenance.
    pub fn at(self, stage: &'static str, index: usize) -> Self {
        BenchError::Sample { stage, index, source: Box::new(self) }
    }

    pub fn is_leakage(&self) -> bool {
        match self {
            BenchError::Leakage(_) => true,
            BenchError::Sample { source, .. } => source.is_leakage(),
            _ => false,
        }
    }
}
