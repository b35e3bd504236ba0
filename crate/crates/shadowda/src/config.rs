//! Experiment config: a TOML file naming a preset task, with optional deep
//! overrides of the task spec and trial plan.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use shadowda_core::bench::{Method, TaskSpec, TrialPlan};
use shadowda_core::select::Criterion;

use crate::error::CliError;
use crate::formats::ShadowFormat;
use crate::store::sha256_hex;

/// The config file as written.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub task: Option<String>,
    pub seed: Option<u64>,
    pub methods: Option<Vec<String>>,
    pub criteria: Option<Vec<String>>,
    pub format: Option<ShadowFormat>,
    /// Merged key by key onto the preset's task spec.
    pub task_spec: Option<toml::Table>,
    /// Merged key by key onto the default plan.
    pub plan: Option<toml::Table>,
}

/// Everything a run needs, after presets, overrides and CLI flags.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub task: TaskSpec,
    pub plan: TrialPlan,
    pub methods: Vec<Method>,
    pub criteria: Vec<Criterion>,
    pub format: ShadowFormat,
}

/// Flag values that override the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub task: Option<String>,
    pub seed: Option<u64>,
    pub methods: Vec<String>,
    pub criteria: Vec<String>,
    pub format: Option<ShadowFormat>,
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn overlay<T: Clone + Serialize + serde::de::DeserializeOwned>(base: &T, table: Option<toml::Table>, what: &str) -> Result<T, CliError> {
    let Some(t) = table else { return Ok(base.clone()) };
    let mut v = serde_json::to_value(base).map_err(|e| CliError::Config(e.to_string()))?;
    merge(&mut v, serde_json::to_value(t).map_err(|e| CliError::Config(e.to_string()))?);
    serde_json::from_value(v).map_err(|e| CliError::Config(format!("[{what}]: {e}")))
}

fn parse_all<T: std::str::FromStr<Err = &'static str>>(v: &[String]) -> Result<Vec<T>, CliError> {
    v.iter().map(|s| s.parse().map_err(|e: &str| CliError::Config(format!("{s}: {e}")))).collect()
}

impl RunConfig {
    pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<Self, CliError> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                toml::from_str::<ConfigFile>(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => ConfigFile::default(),
        };
        Self::resolve(file, ov)
    }

    pub fn resolve(file: ConfigFile, ov: &Overrides) -> Result<Self, CliError> {
        let id = ov.task.clone().or(file.task).ok_or_else(|| CliError::Config("no task id (set `task` in the config or pass --task)".into()))?;
        let preset = TaskSpec::preset(&id).map_err(|e| CliError::Config(e.to_string()))?;
        let task: TaskSpec = overlay(&preset, file.task_spec, "task_spec")?;
        let base_plan = if id.starts_with("desk-") { TrialPlan::desk() } else { TrialPlan::default() };
        let mut plan: TrialPlan = overlay(&base_plan, file.plan, "plan")?;
        if let Some(s) = ov.seed.or(file.seed) {
            plan.seed = s;
        }
        plan.validate(task.classes()).map_err(|e| CliError::Config(e.to_string()))?;
        let methods = if !ov.methods.is_empty() {
            parse_all(&ov.methods)?
        } else {
            parse_all(&file.methods.unwrap_or_else(|| vec!["erm".into(), "uda".into()]))?
        };
        let criteria = if !ov.criteria.is_empty() {
            parse_all(&ov.criteria)?
        } else {
            parse_all(&file.criteria.unwrap_or_else(|| vec!["ensv".into(), "infomax".into()]))?
        };
        if criteria.is_empty() {
            return Err(CliError::Config("at least one selection criterion is required".into()));
        }
        Ok(RunConfig { task, plan, methods, criteria, format: ov.format.or(file.format).unwrap_or(ShadowFormat::Binary) })
    }

    /// Hash of what determines the data: task spec and plan.
    pub fn data_hash(&self) -> String {
        let v = serde_json::json!({ "task": &self.task, "plan": &self.plan });
        sha256_hex(&serde_json::to_vec(&v).expect("serializable"))
    }
}
