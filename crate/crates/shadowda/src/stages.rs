//! Pipeline stages. Each reads its inputs from the run directory, checks
//! them against their producers' receipts, writes its artifacts atomically
//! and records a receipt. A stage whose receipt still matches its config,
//! params and input hashes is skipped.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use shadowda_core::bench::{
    assemble_task, method_candidates, prediction_grid_csv, score_choice, select_candidates, shot_provenance,
    trial_features, trial_shadows, CandidateSet, Choice, DatasetManifest, LeakageGuard, Method, TargetSplit, TrialData,
    TrialReport, TrialRow, TrialShadows,
};
use shadowda_core::cdan::Features;
use shadowda_core::exec::ParMap;
use shadowda_core::shadows::ShadowRecord;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::formats::{decode_shadows, encode_shadows, ShadowFormat};
use crate::pool::RayonPool;
use crate::store::{Receipt, RunDir, MANIFEST};

pub const REPORT: &str = "report.json";
pub const TABLE: &str = "report.txt";
pub const PREDICTIONS: &str = "predictions.csv";

/// Features of one trial as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialFeatures {
    pub trial: usize,
    pub split: TargetSplit,
    pub source: Features,
    pub target: Features,
}

pub struct Pipeline {
    pub cfg: RunConfig,
    pub run: RunDir,
    pub exec: RayonPool,
    config_hash: String,
}

fn to_json<T: Serialize>(v: &T) -> Result<Vec<u8>, CliError> {
    serde_json::to_vec(v).map_err(|e| CliError::Stage(e.to_string()))
}

fn from_json<T: DeserializeOwned>(rel: &str, bytes: &[u8]) -> Result<T, CliError> {
    serde_json::from_slice(bytes).map_err(|e| CliError::Stage(format!("{rel}: {e}")))
}

fn shadow_file(t: usize, domain: &str, f: ShadowFormat) -> String {
    format!("shadows/trial-{t:03}.{domain}.{}", f.extension())
}

fn features_file(t: usize) -> String {
    format!("features/trial-{t:03}.json")
}

fn trial_file(dir: &str, t: usize, m: Method) -> String {
    format!("{dir}/trial-{t:03}.{}.json", m.name())
}

pub fn train_stage(m: Method) -> String {
    match m {
        Method::Uda => "train-uda".into(),
        Method::Erm => "train-erm".into(),
        Method::Cluster(c) => format!("cluster-{}", c.name()),
    }
}

fn collect<T>(v: Vec<Result<T, CliError>>) -> Result<Vec<T>, CliError> {
    v.into_iter().collect()
}

impl Pipeline {
    pub fn new(cfg: RunConfig, run: RunDir, exec: RayonPool) -> Self {
        let config_hash = cfg.data_hash();
        Pipeline { cfg, run, exec, config_hash }
    }

    fn trials(&self) -> usize {
        self.cfg.plan.trials
    }

    /// Run `body` unless the previous receipt is still valid. `body` returns
    /// the written outputs (path → hash).
    fn stage<F>(&self, stage: &str, params: Value, inputs: BTreeMap<String, String>, body: F) -> Result<Receipt, CliError>
    where
        F: FnOnce() -> Result<BTreeMap<String, String>, CliError>,
    {
        if let Some(prev) = self.run.receipt(stage)? {
            if self.run.up_to_date(&prev, &self.config_hash, &params, &inputs) {
                log::info!("{stage}: up to date");
                return Ok(prev);
            }
        }
        log::info!("{stage}: running");
        let t0 = Instant::now();
        let outputs = body()?;
        let r = Receipt {
            stage: stage.to_string(),
            config: self.config_hash.clone(),
            seed: self.cfg.plan.seed,
            params,
            inputs,
            outputs,
            duration_ms: t0.elapsed().as_millis() as u64,
        };
        self.run.write_receipt(&r)?;
        Ok(r)
    }

    fn manifest_hash(&self) -> Result<String, CliError> {
        self.run.hash(MANIFEST)
    }

    /// Hash inputs for a receipt; the manifest is always included.
    fn inputs(&self, files: &[String]) -> Result<BTreeMap<String, String>, CliError> {
        let mut m = BTreeMap::new();
        m.insert(MANIFEST.to_string(), self.manifest_hash()?);
        for f in files {
            m.insert(f.clone(), self.run.hash(f)?);
        }
        Ok(m)
    }

    fn read<T: DeserializeOwned>(&self, rel: &str, producer: &str) -> Result<T, CliError> {
        let mh = self.manifest_hash()?;
        let bytes = self.run.read_checked(rel, producer, &self.config_hash, Some(&mh))?;
        from_json(rel, &bytes)
    }

    pub fn manifest(&self) -> Result<DatasetManifest, CliError> {
        self.read(MANIFEST, "gen-states")
    }

    pub fn gen_states(&self) -> Result<Receipt, CliError> {
        self.stage("gen-states", Value::Null, BTreeMap::new(), || {
            let m = assemble_task(&self.cfg.task, &self.cfg.plan, &self.exec).map_err(|e| CliError::stage("gen-states", e))?;
            log::info!("{} ({} oracle draws rejected)", m.describe(), m.rejected);
            let mut out = BTreeMap::new();
            out.insert(MANIFEST.to_string(), self.run.write(MANIFEST, &to_json(&m)?)?);
            let resolved = serde_json::to_vec_pretty(&self.cfg).map_err(|e| CliError::Stage(e.to_string()))?;
            out.insert("config.resolved.json".to_string(), self.run.write("config.resolved.json", &resolved)?);
            Ok(out)
        })
    }

    pub fn gen_shadows(&self, format: ShadowFormat) -> Result<Receipt, CliError> {
        let m = self.manifest()?;
        let inputs = self.inputs(&[])?;
        self.stage("gen-shadows", json!({ "format": format }), inputs, || {
            let mut out = BTreeMap::new();
            for t in 0..self.trials() {
                let sh = trial_shadows(&m, t, &self.exec).map_err(|e| CliError::stage("gen-shadows", e))?;
                if let Some(src) = &sh.source {
                    let rel = shadow_file(t, "source", format);
                    out.insert(rel.clone(), self.run.write(&rel, &encode_shadows(src, format))?);
                }
                let rel = shadow_file(t, "target", format);
                out.insert(rel.clone(), self.run.write(&rel, &encode_shadows(&sh.target, format))?);
            }
            Ok(out)
        })
    }

    /// Shadow files of one trial from the gen-shadows receipt, with the
    /// provenance the JSONL form drops restored from the manifest.
    fn shadows(&self, m: &DatasetManifest, t: usize) -> Result<TrialShadows, CliError> {
        let r = self.run.receipt("gen-shadows")?.ok_or_else(|| CliError::Stage("no shadows; run gen-shadows first".into()))?;
        let format: ShadowFormat = serde_json::from_value(r.params["format"].clone()).map_err(|e| CliError::Stage(e.to_string()))?;
        let mh = self.manifest_hash()?;
        let load = |domain: &str, target: bool| -> Result<Vec<ShadowRecord>, CliError> {
            let rel = shadow_file(t, domain, format);
            let bytes = self.run.read_checked(&rel, "gen-shadows", &self.config_hash, Some(&mh))?;
            let mut recs = decode_shadows(&bytes, format).map_err(|e| CliError::Stage(format!("{rel}: {e}")))?;
            let expected = if target { m.target.len() } else { m.source.len() };
            if recs.len() != expected {
                return Err(CliError::Stage(format!("{rel}: {} records, manifest has {expected}", recs.len())));
            }
            for (i, r) in recs.iter_mut().enumerate() {
                let p = shot_provenance(m, target, t, i);
                if r.provenance.state_id != p.state_id {
                    return Err(CliError::Stage(format!("{rel}: record {i} belongs to state {}", r.provenance.state_id)));
                }
                r.provenance = p;
            }
            Ok(recs)
        };
        let source = if m.task.shots_source.is_some() { Some(load("source", false)?) } else { None };
        Ok(TrialShadows { trial: t, source, target: load("target", true)? })
    }

    fn shadow_inputs(&self, target_only: bool) -> Result<Vec<String>, CliError> {
        let r = self.run.receipt("gen-shadows")?.ok_or_else(|| CliError::Stage("no shadows; run gen-shadows first".into()))?;
        Ok(r.outputs.keys().filter(|k| !target_only || k.contains(".target.")).cloned().collect())
    }

    pub fn features(&self) -> Result<Receipt, CliError> {
        let m = self.manifest()?;
        let inputs = self.inputs(&self.shadow_inputs(false)?)?;
        self.stage("features", Value::Null, inputs, || {
            let files = collect(self.exec.map(self.trials(), |t| {
                let d = trial_features(&m, &self.shadows(&m, t)?, &self.exec).map_err(|e| CliError::stage("features", e))?;
                let f = TrialFeatures { trial: t, split: d.split, source: d.source, target: d.target };
                let rel = features_file(t);
                Ok((rel.clone(), self.run.write(&rel, &to_json(&f)?)?))
            }))?;
            Ok(files.into_iter().collect())
        })
    }

    fn trial_data(&self, m: &DatasetManifest, t: usize, with_records: bool) -> Result<TrialData, CliError> {
        let f: TrialFeatures = self.read(&features_file(t), "features")?;
        let target_records = if with_records { self.shadows(m, t)?.target } else { Vec::new() };
        Ok(TrialData { trial: t, split: f.split, source: f.source, target: f.target, target_records })
    }

    /// `train-uda`, `train-erm` or one clustering baseline.
    pub fn train(&self, method: Method) -> Result<Receipt, CliError> {
        let m = self.manifest()?;
        let stage = train_stage(method);
        let clustering = matches!(method, Method::Cluster(_));
        let mut files: Vec<String> = (0..self.trials()).map(features_file).collect();
        if clustering {
            files.extend(self.shadow_inputs(true)?);
        }
        let inputs = self.inputs(&files)?;
        self.stage(&stage, Value::Null, inputs, || {
            let files = collect(self.exec.map(self.trials(), |t| {
                let d = self.trial_data(&m, t, clustering)?;
                let set = method_candidates(&m, &d, method, &self.exec).map_err(|e| CliError::stage(&stage, e))?;
                let rel = trial_file("candidates", t, method);
                Ok((rel.clone(), self.run.write(&rel, &to_json(&set)?)?))
            }))?;
            Ok(files.into_iter().collect())
        })
    }

    pub fn select(&self, method: Method) -> Result<Receipt, CliError> {
        let files: Vec<String> = (0..self.trials()).map(|t| trial_file("candidates", t, method)).collect();
        let inputs = self.inputs(&files)?;
        let criteria = self.cfg.criteria.clone();
        let stage = format!("select-{}", method.name());
        self.stage(&stage, json!({ "criteria": &criteria }), inputs, || {
            let mut out = BTreeMap::new();
            for t in 0..self.trials() {
                let set: CandidateSet = self.read(&trial_file("candidates", t, method), &train_stage(method))?;
                let choices = select_candidates(&set, &criteria).map_err(|e| CliError::stage(&stage, e))?;
                let rel = trial_file("selection", t, method);
                out.insert(rel.clone(), self.run.write(&rel, &to_json(&choices)?)?);
            }
            Ok(out)
        })
    }

    /// The only stage that opens the hidden target labels.
    pub fn evaluate(&self, method: Method) -> Result<Receipt, CliError> {
        let m = self.manifest()?;
        let mut files: Vec<String> = (0..self.trials()).map(|t| trial_file("candidates", t, method)).collect();
        files.extend((0..self.trials()).map(|t| trial_file("selection", t, method)));
        let inputs = self.inputs(&files)?;
        let stage = format!("evaluate-{}", method.name());
        self.stage(&stage, Value::Null, inputs, || {
            let mut pending = Vec::new();
            for t in 0..self.trials() {
                let set: CandidateSet = self.read(&trial_file("candidates", t, method), &train_stage(method))?;
                let choices: Vec<Choice> = self.read(&trial_file("selection", t, method), &format!("select-{}", method.name()))?;
                pending.push((t, set, choices));
            }
            let guard = LeakageGuard::new();
            guard.open_scoring();
            let mut out = BTreeMap::new();
            for (t, set, choices) in pending {
                let rows = choices.iter().map(|c| score_choice(&m, &set, c, &guard)).collect::<Result<Vec<TrialRow>, _>>();
                let rows = rows.map_err(|e| CliError::stage(&stage, e))?;
                let rel = trial_file("rows", t, method);
                out.insert(rel.clone(), self.run.write(&rel, &to_json(&rows)?)?);
            }
            Ok(out)
        })
    }

    pub fn report(&self) -> Result<TrialReport, CliError> {
        let m = self.manifest()?;
        let mut files = Vec::new();
        for t in 0..self.trials() {
            for &method in &self.cfg.methods {
                files.push(trial_file("rows", t, method));
            }
        }
        let inputs = self.inputs(&files)?;
        let methods: Vec<&str> = self.cfg.methods.iter().map(|m| m.name()).collect();
        self.stage("report", json!({ "methods": methods }), inputs, || {
            let mut rows = Vec::new();
            for t in 0..self.trials() {
                for &method in &self.cfg.methods {
                    let r: Vec<TrialRow> = self.read(&trial_file("rows", t, method), &format!("evaluate-{}", method.name()))?;
                    rows.extend(r);
                }
            }
            let report = TrialReport::from_rows(&m.task.id, m.plan.seed, rows);
            let mut out = BTreeMap::new();
            let pretty = serde_json::to_vec_pretty(&report).map_err(|e| CliError::Stage(e.to_string()))?;
            out.insert(REPORT.to_string(), self.run.write(REPORT, &pretty)?);
            out.insert(TABLE.to_string(), self.run.write(TABLE, report.table().as_bytes())?);
            out.insert(PREDICTIONS.to_string(), self.run.write(PREDICTIONS, prediction_grid_csv(&m, &report).as_bytes())?);
            Ok(out)
        })?;
        self.read(REPORT, "report")
    }

    /// Every stage for the configured methods, in order.
    pub fn full_run(&self) -> Result<TrialReport, CliError> {
        self.gen_states()?;
        self.gen_shadows(self.cfg.format)?;
        self.features()?;
        for &method in &self.cfg.methods {
            self.train(method)?;
            self.select(method)?;
            self.evaluate(method)?;
        }
        self.report()
    }
}
