//! Subcommand bodies. Each returns a summary and leaves printing to the
//! caller.

use std::fs;
use std::path::{Path, PathBuf};

use csiaug_core::augment::{apply_pipeline, DrawLog, SampleKey};
use csiaug_core::csi::{parse_csi_log, CsiError};
use csiaug_core::dataset::{verify_manifest, FileEntry, SubsetManifest, VerificationReport};
use csiaug_core::file::{self, UNLABELED};
use csiaug_core::harness::{format_report, run_ablation, AblationOptions, Report, RunSummary, SubsetData};
use csiaug_core::preview;
use csiaug_core::spectro::{segment, trim, AmplitudeSeries};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{file_stem, RunConfig};
use crate::error::CliError;

fn create_dir(p: &Path) -> Result<(), CliError> {
    fs::create_dir_all(p).map_err(|e| CliError::io(p, e))
}

fn write(p: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(p, bytes).map_err(|e| CliError::io(p, e))
}

fn csi_error(path: &Path, e: CsiError) -> CliError {
    let p = path.display();
    CliError::Parse(match e {
        CsiError::Parse { line, field, msg } => format!("{p}:{line}: field `{field}`: {msg}"),
        CsiError::Structure { line, msg } => format!("{p}:{line}: {msg}"),
        other => format!("{p}: {other}"),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IngestSummary {
    pub manifest: PathBuf,
    pub files: Vec<PathBuf>,
    /// `(source, records parsed, spectrograms written)`.
    pub sources: Vec<(PathBuf, usize, usize)>,
    pub warnings: Vec<String>,
}

/// Parses every source log, segments it and writes one spectrogram file per
/// segment under `<out>/<subset>/`, plus `<out>/<subset>.json`.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<IngestSummary, CliError> {
    let ing = cfg.ingest.as_ref().ok_or_else(|| CliError::Schema(vec!["ingest: section required".into()]))?;
    let sel = ing.selection().expect("validated at load");
    let dir = cfg.out.join(&ing.subset);
    create_dir(&dir)?;

    let per_source: Vec<_> = ing
        .sources
        .par_iter()
        .enumerate()
        .map(|(i, src)| -> Result<_, CliError> {
            let text = fs::read_to_string(&src.path).map_err(|e| CliError::io(&src.path, e))?;
            let log = parse_csi_log(&text, &ing.mapping).map_err(|e| csi_error(&src.path, e))?;
            let mut warnings = Vec::new();
            if log.records.is_empty() {
                warnings.push(format!("{}: no records", src.path.display()));
                return Ok((0, Vec::new(), warnings));
            }
            if log.non_monotonic > 0 {
                warnings.push(format!("{}: {} timestamps go backwards", src.path.display(), log.non_monotonic));
            }
            let series = AmplitudeSeries::from_records(&log.records, &sel).map_err(|e| CliError::Parse(format!("{}: {e}", src.path.display())))?;
            let series = match src.trim {
                Some((a, b)) => trim(&series, a, b).map_err(|e| CliError::Schema(vec![format!("ingest.sources[{i}].trim: {e}")]))?,
                None => series,
            };
            let segments = segment(&series, ing.window, ing.hop).map_err(|e| CliError::Schema(vec![format!("ingest: {e}")]))?;
            Ok((log.records.len(), segments, warnings))
        })
        .collect::<Result<_, _>>()?;

    let mut summary = IngestSummary { manifest: cfg.out.join(format!("{}.json", ing.subset)), files: Vec::new(), sources: Vec::new(), warnings: Vec::new() };
    let mut entries = Vec::new();
    for (src, (records, segments, warnings)) in ing.sources.iter().zip(per_source) {
        let stem = file_stem(&src.path);
        for (k, spec) in segments.iter().enumerate() {
            let rel = format!("{}/{stem}_{k:04}.csis", ing.subset);
            let path = cfg.out.join(&rel);
            file::write_file(&path, spec, src.label.map_or(UNLABELED, |l| l.index() as i8))?;
            entries.push(FileEntry { path: rel, label: src.label, scenario: src.scenario, system: src.system, zone: src.zone, digest: String::new() });
            summary.files.push(path);
        }
        summary.sources.push((src.path.clone(), records, segments.len()));
        summary.warnings.extend(warnings);
    }
    SubsetManifest::build(ing.subset.clone(), entries, &cfg.out)?.save(&summary.manifest)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct AugmentSummary {
    pub outputs: Vec<PathBuf>,
    pub draw_log: Option<PathBuf>,
    pub previews: Vec<PathBuf>,
}

#[derive(Serialize)]
struct DrawLine<'a> {
    file: String,
    log: &'a DrawLog,
}

/// Augments each input once, keyed by its position in the input list, and
/// writes the results under `<out>/augmented/`.
pub fn cmd_augment(cfg: &RunConfig, inputs: &[PathBuf]) -> Result<AugmentSummary, CliError> {
    let aug = cfg.augment.as_ref().ok_or_else(|| CliError::Schema(vec!["augment: section required".into()]))?;
    let inputs = if inputs.is_empty() { &aug.inputs[..] } else { inputs };
    if inputs.is_empty() {
        return Err(CliError::Schema(vec!["augment.inputs: no input files".into()]));
    }
    let mut seen = std::collections::HashSet::new();
    for p in inputs {
        if !seen.insert(file_stem(p)) {
            return Err(CliError::Schema(vec![format!("augment.inputs: file name {} used twice", file_stem(p))]));
        }
    }
    let files = inputs.iter().map(|p| file::read_file(p)).collect::<Result<Vec<_>, _>>()?;
    let dir = cfg.out.join("augmented");
    create_dir(&dir)?;

    let results: Vec<_> = files
        .par_iter()
        .enumerate()
        .map(|(i, f)| apply_pipeline(&f.spectrogram, &aug.pipeline, SampleKey::new(0, i as u64)))
        .collect();

    let mut summary = AugmentSummary { outputs: Vec::new(), draw_log: None, previews: Vec::new() };
    let mut lines = String::new();
    for ((input, f), (spec, log)) in inputs.iter().zip(&files).zip(&results) {
        let stem = file_stem(input);
        let out = dir.join(format!("{stem}.csis"));
        file::write_file(&out, spec, f.label)?;
        summary.outputs.push(out);
        if aug.previews {
            let png = dir.join(format!("{stem}.png"));
            let img = preview::side_by_side(&[preview::render_gray(&f.spectrogram), preview::render_gray(spec)]);
            preview::save_png(&img, &png).map_err(|e| CliError::io(&png, e))?;
            summary.previews.push(png);
        }
        let line = DrawLine { file: input.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(), log };
        lines.push_str(&serde_json::to_string(&line).expect("draw log serializes"));
        lines.push('\n');
    }
    if aug.draw_log {
        let p = dir.join("draws.jsonl");
        write(&p, lines)?;
        summary.draw_log = Some(p);
    }
    Ok(summary)
}

/// Renders one spectrogram file as an 8-bit grayscale PNG.
pub fn cmd_preview(input: &Path, output: &Path) -> Result<(), CliError> {
    let f = file::read_file(input)?;
    preview::save_png(&preview::render_gray(&f.spectrogram), output).map_err(|e| CliError::io(output, e))
}

#[derive(Debug, Clone)]
pub struct AblateOutput {
    pub summary: RunSummary,
    pub report: Report,
    pub results: PathBuf,
}

/// Loads every subset the experiment names.
pub fn load_subsets(cfg: &RunConfig, names: &[&String]) -> Result<SubsetData, CliError> {
    let mut data = SubsetData::new();
    for &name in names {
        if data.contains_key(name) {
            continue;
        }
        let path = cfg.datasets.get(name).ok_or_else(|| CliError::Schema(vec![format!("datasets.{name}: not configured")]))?;
        let manifest = SubsetManifest::load(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        data.insert(name.clone(), manifest.load_samples(base)?);
    }
    Ok(data)
}

/// Runs the experiment and writes `results.json`, `report.md`,
/// `report.csv` and `checkpoints/<arm>/run<k>.ckpt` under the output
/// directory.
pub fn cmd_ablate(cfg: &RunConfig) -> Result<AblateOutput, CliError> {
    let exp = cfg.experiment.as_ref().ok_or_else(|| CliError::Schema(vec!["experiment: section required".into()]))?;
    let names: Vec<&String> = std::iter::once(&exp.train_subset).chain(&exp.eval_subsets).collect();
    let data = load_subsets(cfg, &names)?;
    create_dir(&cfg.out)?;
    let ckpt = cfg.out.join("checkpoints");
    let summary = run_ablation(exp, &data, &AblationOptions { checkpoint_dir: Some(&ckpt) }).map_err(|e| match e {
        csiaug_core::harness::HarnessError::Config(p) => CliError::Schema(p),
        other => CliError::Runtime(other.to_string()),
    })?;
    let report = format_report(&summary);
    let results = cfg.out.join("results.json");
    write(&results, serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n")?;
    write(&cfg.out.join("report.md"), &report.markdown)?;
    write(&cfg.out.join("report.csv"), &report.csv)?;
    Ok(AblateOutput { summary, report, results })
}

/// Verifies each manifest against the files beside it.
pub fn cmd_verify(manifests: &[PathBuf]) -> Result<Vec<VerificationReport>, CliError> {
    manifests
        .iter()
        .map(|p| {
            let m = SubsetManifest::load(p)?;
            Ok(verify_manifest(&m, p.parent().unwrap_or(Path::new("."))))
        })
        .collect()
}
