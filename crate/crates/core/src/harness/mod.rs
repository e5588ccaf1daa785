//! Ablation experiments: train one classifier per (arm, run), evaluate the
//! best-validation checkpoint on each evaluation subset and aggregate.

pub mod model;
pub mod report;
pub mod train;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::PipelineSpec;
use crate::dataset::{split, DatasetError, Sample, SplitSpec};
use crate::rng::{derive_seed, tag};

pub use model::{Adam, Classifier, ClassifierConfig, CompactCnn, Trainable};
pub use report::{format_report, Report};
pub use train::{best_epoch, evaluate, train_one, train_with, TrainedRun};

/// Name of the arm every other arm is compared against.
pub const BASELINE_ARM: &str = "none";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("cannot evaluate on an empty sample list")]
    EmptyEvaluation,
    #[error("run {run} diverged at epoch {epoch} (non-finite loss)")]
    Diverged { run: usize, epoch: usize },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub name: String,
    #[serde(default)]
    pub pipeline: PipelineSpec,
}

impl Arm {
    pub fn new(name: impl Into<String>, pipeline: PipelineSpec) -> Self {
        Self { name: name.into(), pipeline }
    }

    pub fn baseline() -> Self {
        Self::new(BASELINE_ARM, PipelineSpec::default())
    }
}

fn default_runs() -> usize {
    10
}
fn default_epochs() -> usize {
    50
}
fn default_lr() -> f64 {
    1e-4
}
fn default_batch() -> usize {
    16
}
fn default_train_fraction() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub train_subset: String,
    pub eval_subsets: Vec<String>,
    pub arms: Vec<Arm>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    /// Share of the training subset used for training; the rest validates.
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn new(train_subset: impl Into<String>, eval_subsets: Vec<String>, arms: Vec<Arm>, seed: u64) -> Self {
        Self {
            train_subset: train_subset.into(),
            eval_subsets,
            arms,
            runs: default_runs(),
            epochs: default_epochs(),
            lr: default_lr(),
            batch: default_batch(),
            classifier: ClassifierConfig::default(),
            train_fraction: default_train_fraction(),
            seed,
        }
    }

    /// Every problem with this experiment, as `field: message`.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.runs == 0 {
            out.push("runs: must be at least 1".into());
        }
        if self.epochs == 0 {
            out.push("epochs: must be at least 1".into());
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            out.push(format!("lr: {} is not a positive number", self.lr));
        }
        if self.batch == 0 {
            out.push("batch: must be at least 1".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            out.push(format!("train_fraction: {} outside (0, 1)", self.train_fraction));
        }
        if self.classifier.channels.is_empty() || self.classifier.channels.contains(&0) {
            out.push("classifier.channels: must be non-empty and positive".into());
        }
        if self.eval_subsets.is_empty() {
            out.push("eval_subsets: at least one subset required".into());
        }
        match self.arms.iter().find(|a| a.name == BASELINE_ARM) {
            None => out.push(format!("arms: an arm named \"{BASELINE_ARM}\" is required")),
            Some(a) if !a.pipeline.is_empty() => out.push(format!("arms.{BASELINE_ARM}: pipeline must be empty")),
            _ => {}
        }
        for (i, arm) in self.arms.iter().enumerate() {
            if self.arms[..i].iter().any(|a| a.name == arm.name) {
                out.push(format!("arms.{}: duplicate arm name", arm.name));
            }
            if let Err(e) = arm.pipeline.validate() {
                out.push(format!("arms.{}.pipeline: {e}", arm.name));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Config(problems))
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec { train_fraction: self.train_fraction, stratified: true, split_seed: derive_seed(self.seed, &[tag(b"split")]) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunOutcome {
    Completed {
        best_epoch: usize,
        best_val_accuracy: f64,
        /// Accuracy per evaluation subset, in `eval_subsets` order.
        test_accuracy: Vec<f64>,
    },
    Failed {
        cause: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_index: usize,
    #[serde(flatten)]
    pub outcome: RunOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetStats {
    pub subset: String,
    /// Number of completed runs aggregated.
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1); zero for fewer than two runs.
    pub std: f64,
    /// `mean` minus the baseline arm's mean.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub name: String,
    pub runs: Vec<RunRecord>,
    pub stats: Vec<SubsetStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub train_subset: String,
    pub eval_subsets: Vec<String>,
    pub runs: usize,
    pub seed: u64,
    pub arms: Vec<ArmSummary>,
}

impl RunSummary {
    pub fn arm(&self, name: &str) -> Option<&ArmSummary> {
        self.arms.iter().find(|a| a.name == name)
    }

    pub fn failed_runs(&self) -> usize {
        self.arms
            .iter()
            .flat_map(|a| &a.runs)
            .filter(|r| matches!(r.outcome, RunOutcome::Failed { .. }))
            .count()
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Builds per-arm statistics and baseline deltas from run records.
pub fn aggregate(eval_subsets: &[String], arms: Vec<(String, Vec<RunRecord>)>) -> Vec<ArmSummary> {
    let stats_for = |runs: &[RunRecord]| -> Vec<(usize, f64, f64)> {
        (0..eval_subsets.len())
            .map(|s| {
                let accs: Vec<f64> = runs
                    .iter()
                    .filter_map(|r| match &r.outcome {
                        RunOutcome::Completed { test_accuracy, .. } => Some(test_accuracy[s]),
                        RunOutcome::Failed { .. } => None,
                    })
                    .collect();
                let (m, sd) = mean_std(&accs);
                (accs.len(), m, sd)
            })
            .collect()
    };
    let baseline: Option<Vec<f64>> = arms
        .iter()
        .find(|(name, _)| name == BASELINE_ARM)
        .map(|(_, runs)| stats_for(runs).into_iter().map(|s| s.1).collect());
    arms.into_iter()
        .map(|(name, runs)| {
            let stats = stats_for(&runs)
                .into_iter()
                .enumerate()
                .map(|(s, (n, mean, std))| SubsetStats {
                    subset: eval_subsets[s].clone(),
                    n,
                    mean,
                    std,
                    delta: baseline.as_ref().map_or(f64::NAN, |b| mean - b[s]),
                })
                .collect();
            ArmSummary { name, runs, stats }
        })
        .collect()
}

/// Samples per subset name.
pub type SubsetData = BTreeMap<String, Vec<Sample>>;

/// Where run artifacts go, if anywhere.
#[derive(Debug, Clone, Default)]
pub struct AblationOptions<'a> {
    /// Best checkpoints are written to `<dir>/<arm>/run<k>.ckpt`.
    pub checkpoint_dir: Option<&'a Path>,
}

/// Writes raw parameters: magic `CSCK`, `u64` count, then `f64` values, all
/// little-endian.
pub fn save_checkpoint(path: &Path, params: &[f64]) -> std::io::Result<()> {
    let mut bytes = Vec::with_capacity(12 + 8 * params.len());
    bytes.extend_from_slice(b"CSCK");
    bytes.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    fs::write(path, bytes)
}

pub fn load_checkpoint(path: &Path) -> std::io::Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    let bad = || std::io::Error::new(std::io::ErrorKind::InvalidData, "not a checkpoint");
    if bytes.len() < 12 || &bytes[..4] != b"CSCK" {
        return Err(bad());
    }
    let n = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
    if bytes.len() != 12 + 8 * n {
        return Err(bad());
    }
    Ok(bytes[12..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// Runs every arm `cfg.runs` times and aggregates test accuracies.
///
/// Run `k` of every arm shares its initialization and batch order; arms
/// differ only in augmentation. Runs execute in parallel, and results do
/// not depend on scheduling.
pub fn run_ablation(cfg: &ExperimentSpec, data: &SubsetData, opts: &AblationOptions) -> Result<RunSummary, HarnessError> {
    let mut problems = cfg.problems();
    for name in std::iter::once(&cfg.train_subset).chain(&cfg.eval_subsets) {
        match data.get(name) {
            None => problems.push(format!("subset {name}: not available")),
            Some(s) if s.is_empty() => problems.push(format!("subset {name}: empty")),
            _ => {}
        }
    }
    if !problems.is_empty() {
        return Err(HarnessError::Config(problems));
    }
    let (train, val) = split(&data[&cfg.train_subset], &cfg.split_spec())?;
    let evals: Vec<&[Sample]> = cfg.eval_subsets.iter().map(|s| data[s].as_slice()).collect();

    let jobs: Vec<(usize, usize)> = (0..cfg.arms.len()).flat_map(|a| (0..cfg.runs).map(move |r| (a, r))).collect();
    let records: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(a, r)| -> Result<RunRecord, HarnessError> {
            let arm = &cfg.arms[a];
            let outcome = match train_one(&arm.pipeline, &train, &val, cfg, r) {
                Ok(run) => {
                    if let Some(dir) = opts.checkpoint_dir {
                        let arm_dir = dir.join(&arm.name);
                        fs::create_dir_all(&arm_dir).map_err(|e| HarnessError::Io(e.to_string()))?;
                        save_checkpoint(&arm_dir.join(format!("run{r}.ckpt")), run.model.params())
                            .map_err(|e| HarnessError::Io(e.to_string()))?;
                    }
                    let test_accuracy = evals.iter().map(|e| evaluate(&run.model, e)).collect::<Result<_, _>>()?;
                    RunOutcome::Completed { best_epoch: run.best_epoch, best_val_accuracy: run.best_val_accuracy, test_accuracy }
                }
                Err(e @ HarnessError::Diverged { .. }) => RunOutcome::Failed { cause: e.to_string() },
                Err(e) => return Err(e),
            };
            Ok(RunRecord { run_index: r, outcome })
        })
        .collect::<Result<_, _>>()?;

    let mut per_arm: Vec<(String, Vec<RunRecord>)> = cfg.arms.iter().map(|a| (a.name.clone(), Vec::new())).collect();
    for (&(a, _), rec) in jobs.iter().zip(records) {
        per_arm[a].1.push(rec);
    }
    Ok(RunSummary {
        train_subset: cfg.train_subset.clone(),
        eval_subsets: cfg.eval_subsets.clone(),
        runs: cfg.runs,
        seed: cfg.seed,
        arms: aggregate(&cfg.eval_subsets, per_arm),
    })
}
