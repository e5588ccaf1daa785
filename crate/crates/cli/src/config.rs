//! The run configuration: one JSON file per experiment, plus flag overrides.
//!
//! ```json
//! {
//!   "seed": 7,
//!   "out": "runs/lb",
//!   "ingest": {
//!     "subset": "mine", "selection": "lltf52", "window": 400, "hop": 400,
//!     "mapping": { "delimiter": ",", "csi": 3 },
//!     "sources": [{ "path": "walk.log", "label": 1, "trim": [120, 1320] }]
//!   },
//!   "augment": { "pipeline": { "ops": [{ "kind": "circular_rotation" }] }, "inputs": ["a.csis"] },
//!   "datasets": { "W1.8k_LB": "data/W1.8k_LB.json" },
//!   "experiment": { "train_subset": "W1.8k_LB", "eval_subsets": ["W1.8k_NB"], "arms": [{ "name": "none" }] }
//! }
//! ```
//!
//! Relative paths resolve against the directory holding the config file.
//! `seed` is mandatory. It fills `experiment.seed` and
//! `augment.pipeline.global_seed` when those are absent, and `--seed`
//! overrides all three.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use csiaug_core::augment::PipelineSpec;
use csiaug_core::csi::{ColumnMapping, SubcarrierSelection};
use csiaug_core::dataset::{Activity, Scenario, System};
use csiaug_core::harness::ExperimentSpec;
use serde::Deserialize;
use serde_json::Value;

use crate::error::CliError;

fn default_selection() -> String {
    "lltf52".into()
}
fn default_window() -> usize {
    400
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Source {
    pub path: PathBuf,
    #[serde(default)]
    pub label: Option<Activity>,
    /// Packet range `[start, end)` to keep.
    #[serde(default)]
    pub trim: Option<(usize, usize)>,
    #[serde(default)]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub system: Option<System>,
    #[serde(default)]
    pub zone: Option<u8>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    pub subset: String,
    #[serde(default)]
    pub mapping: ColumnMapping,
    #[serde(default = "default_selection")]
    pub selection: String,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_window")]
    pub hop: usize,
    pub sources: Vec<Source>,
}

impl IngestConfig {
    pub fn selection(&self) -> Option<SubcarrierSelection> {
        SubcarrierSelection::preset(&self.selection)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAugment {
    #[serde(default)]
    pipeline: Option<Value>,
    #[serde(default)]
    inputs: Vec<PathBuf>,
    #[serde(default)]
    previews: bool,
    #[serde(default = "default_true")]
    draw_log: bool,
}

#[derive(Debug, Clone)]
pub struct AugmentConfig {
    pub pipeline: PipelineSpec,
    pub inputs: Vec<PathBuf>,
    /// Write an original|augmented PNG next to every output.
    pub previews: bool,
    /// Write every draw as JSON lines.
    pub draw_log: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    ingest: Option<IngestConfig>,
    #[serde(default)]
    augment: Option<RawAugment>,
    #[serde(default)]
    datasets: BTreeMap<String, PathBuf>,
    #[serde(default)]
    experiment: Option<Value>,
}

/// Values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// A validated configuration with every path resolved.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub ingest: Option<IngestConfig>,
    pub augment: Option<AugmentConfig>,
    /// Subset name to manifest path.
    pub datasets: BTreeMap<String, PathBuf>,
    pub experiment: Option<ExperimentSpec>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Sets `key` on a JSON object when absent, or always when `force`.
fn fill_seed(v: &mut Value, key: &str, seed: u64, force: bool) {
    if let Value::Object(map) = v {
        if force || !map.contains_key(key) {
            map.insert(key.into(), Value::from(seed));
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, &base, overrides)
    }

    /// Parses and validates, reporting every problem at once.
    pub fn from_json(text: &str, base: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| CliError::Schema(vec![format!("config: {e}")]))?;
        let mut problems = Vec::new();
        let forced = overrides.seed.is_some();
        let seed = overrides.seed.or(raw.seed);
        if seed.is_none() {
            problems.push("seed: required (set it in the config or pass --seed)".to_string());
        }
        let seed_value = seed.unwrap_or(0);
        let out = overrides.out.clone().unwrap_or_else(|| resolve(base, raw.out.as_deref().unwrap_or(Path::new("out"))));

        let ingest = raw.ingest.map(|mut ing| {
            if ing.selection().is_none() {
                problems.push(format!("ingest.selection: unknown preset \"{}\"", ing.selection));
            }
            if ing.window == 0 || ing.hop == 0 {
                problems.push("ingest.window, ingest.hop: must be at least 1".into());
            }
            if ing.subset.is_empty() {
                problems.push("ingest.subset: must not be empty".into());
            }
            let mut stems = HashSet::new();
            for (i, s) in ing.sources.iter_mut().enumerate() {
                s.path = resolve(base, &s.path);
                if !s.path.is_file() {
                    problems.push(format!("ingest.sources[{i}].path: {} not found", s.path.display()));
                }
                if let Some((a, b)) = s.trim {
                    if a >= b {
                        problems.push(format!("ingest.sources[{i}].trim: start {a} must be below end {b}"));
                    }
                }
                if !stems.insert(file_stem(&s.path)) {
                    problems.push(format!("ingest.sources[{i}].path: file name {} used twice", file_stem(&s.path)));
                }
            }
            ing
        });

        let augment = raw.augment.and_then(|a| {
            let mut pipeline = a.pipeline.unwrap_or_else(|| Value::Object(Default::default()));
            fill_seed(&mut pipeline, "global_seed", seed_value, forced);
            let pipeline: PipelineSpec = match serde_json::from_value(pipeline) {
                Ok(p) => p,
                Err(e) => {
                    problems.push(format!("augment.pipeline: {e}"));
                    return None;
                }
            };
            if let Err(e) = pipeline.validate() {
                problems.push(format!("augment.pipeline: {e}"));
            }
            let inputs: Vec<PathBuf> = a.inputs.iter().map(|p| resolve(base, p)).collect();
            for (i, p) in inputs.iter().enumerate() {
                if !p.is_file() {
                    problems.push(format!("augment.inputs[{i}]: {} not found", p.display()));
                }
            }
            Some(AugmentConfig { pipeline, inputs, previews: a.previews, draw_log: a.draw_log })
        });

        let datasets: BTreeMap<String, PathBuf> = raw.datasets.into_iter().map(|(k, p)| (k, resolve(base, &p))).collect();
        for (name, p) in &datasets {
            if !p.is_file() {
                problems.push(format!("datasets.{name}: {} not found", p.display()));
            }
        }

        let experiment = raw.experiment.and_then(|mut v| {
            fill_seed(&mut v, "seed", seed_value, forced);
            match serde_json::from_value::<ExperimentSpec>(v) {
                Ok(spec) => {
                    problems.extend(spec.problems().into_iter().map(|p| format!("experiment.{p}")));
                    if !datasets.contains_key(&spec.train_subset) {
                        problems.push(format!("experiment.train_subset: no dataset named \"{}\"", spec.train_subset));
                    }
                    for s in &spec.eval_subsets {
                        if !datasets.contains_key(s) {
                            problems.push(format!("experiment.eval_subsets: no dataset named \"{s}\""));
                        }
                    }
                    Some(spec)
                }
                Err(e) => {
                    problems.push(format!("experiment: {e}"));
                    None
                }
            }
        });

        if !problems.is_empty() {
            return Err(CliError::Schema(problems));
        }
        Ok(Self { seed: seed_value, out, ingest, augment, datasets, experiment })
    }
}

pub(crate) fn file_stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(text: &str, o: &Overrides) -> Vec<String> {
        match RunConfig::from_json(text, Path::new("/nonexistent"), o) {
            Err(CliError::Schema(p)) => p,
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn seed_is_required() {
        let p = schema("{}", &Overrides::default());
        assert_eq!(p.len(), 1);
        assert!(p[0].starts_with("seed:"));
        let cfg = RunConfig::from_json("{}", Path::new("."), &Overrides { seed: Some(3), out: None }).unwrap();
        assert_eq!(cfg.seed, 3);
    }

    #[test]
    fn every_problem_is_listed() {
        let text = r#"{
            "datasets": {"A": "missing.json"},
            "experiment": {"train_subset": "A", "eval_subsets": ["B"], "arms": [{"name": "rot"}], "runs": 0}
        }"#;
        let p = schema(text, &Overrides::default());
        for prefix in ["seed:", "datasets.A:", "experiment.runs:", "experiment.arms:", "experiment.eval_subsets:"] {
            assert!(p.iter().any(|m| m.starts_with(prefix)), "{prefix} missing from {p:?}");
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let p = schema(r#"{"seed": 1, "sed": 2}"#, &Overrides::default());
        assert!(p[0].contains("unknown field"), "{p:?}");
    }

    #[test]
    fn seed_fills_and_overrides() {
        let text = r#"{"seed": 5, "augment": {"pipeline": {"ops": []}}, "experiment": null}"#;
        let cfg = RunConfig::from_json(text, Path::new("."), &Overrides::default()).unwrap();
        assert_eq!(cfg.augment.unwrap().pipeline.global_seed, 5);
        let text = r#"{"seed": 5, "augment": {"pipeline": {"global_seed": 9}}}"#;
        let cfg = RunConfig::from_json(text, Path::new("."), &Overrides::default()).unwrap();
        assert_eq!(cfg.augment.unwrap().pipeline.global_seed, 9);
        let cfg = RunConfig::from_json(text, Path::new("."), &Overrides { seed: Some(1), out: None }).unwrap();
        assert_eq!(cfg.augment.unwrap().pipeline.global_seed, 1);
    }
}
