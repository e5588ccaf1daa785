//! Subset manifests with content digests.
//!
//! A manifest is a JSON file listing the spectrogram files of one subset
//! with their labels and SHA-256 digests, plus the expected class counts:
//!
//! ```json
//! {
//!   "subset": "W1.8k_LB",
//!   "files": [{"path": "lb/0000.csis", "label": 0, "scenario": "LOS",
//!              "system": "BQ", "zone": 1, "digest": "9f86d0..."}],
//!   "counts": {"per_class": [149, 154, 155], "total": 458}
//! }
//! ```
//!
//! File paths are relative to the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Activity, Sample, Scenario, System, NUM_CLASSES};
use crate::file;

/// Published subset sizes per class: no presence, walking, walking + arm-waving.
pub const REFERENCE_COUNTS: [(&str, Scenario, System, [usize; NUM_CLASSES]); 4] = [
    ("W1.8k_LB", Scenario::Los, System::Bq, [149, 154, 155]),
    ("W1.8k_LP", Scenario::Los, System::Pifa, [149, 160, 152]),
    ("W1.8k_NB", Scenario::Nlos, System::Bq, [148, 150, 152]),
    ("W1.8k_NP", Scenario::Nlos, System::Pifa, [143, 147, 147]),
];

pub fn reference_counts(subset: &str) -> Option<ClassCounts> {
    REFERENCE_COUNTS
        .iter()
        .find(|(name, ..)| *name == subset)
        .map(|(_, _, _, c)| ClassCounts::from_per_class(*c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ClassCounts {
    pub per_class: [usize; NUM_CLASSES],
    pub total: usize,
}

impl ClassCounts {
    pub fn from_per_class(per_class: [usize; NUM_CLASSES]) -> Self {
        Self { per_class, total: per_class.iter().sum() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub label: Option<Activity>,
    #[serde(default)]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub system: Option<System>,
    #[serde(default)]
    pub zone: Option<u8>,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetManifest {
    pub subset: String,
    pub files: Vec<FileEntry>,
    pub counts: ClassCounts,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error(transparent)]
    Format(#[from] file::FormatError),
    #[error("{0}")]
    Unlabeled(String),
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl SubsetManifest {
    /// Builds a manifest for files already on disk under `base`, computing
    /// digests and counts. Unlabeled entries count toward the total only.
    pub fn build(subset: impl Into<String>, mut files: Vec<FileEntry>, base: &Path) -> Result<Self, ManifestError> {
        let mut per_class = [0; NUM_CLASSES];
        for entry in &mut files {
            let full = base.join(&entry.path);
            let bytes = fs::read(&full).map_err(|source| ManifestError::Io { path: full.display().to_string(), source })?;
            entry.digest = sha256_hex(&bytes);
            if let Some(l) = entry.label {
                per_class[l.index()] += 1;
            }
        }
        let total = files.len();
        Ok(Self { subset: subset.into(), files, counts: ClassCounts { per_class, total } })
    }

    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = fs::read_to_string(path).map_err(|source| ManifestError::Io { path: path.display().to_string(), source })?;
        serde_json::from_str(&text).map_err(|source| ManifestError::Json { path: path.display().to_string(), source })
    }

    pub fn save(&self, path: &Path) -> Result<(), ManifestError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|source| ManifestError::Io { path: path.display().to_string(), source })
    }

    /// Reads every labeled sample. Fails on unlabeled entries.
    pub fn load_samples(&self, base: &Path) -> Result<Vec<Sample>, ManifestError> {
        self.files
            .iter()
            .map(|e| {
                let label = e.label.ok_or_else(|| ManifestError::Unlabeled(format!("{}: entry has no label", e.path)))?;
                let f = file::read_file(&base.join(&e.path))?;
                Ok(Sample {
                    spectrogram: f.spectrogram,
                    label,
                    scenario: e.scenario,
                    system: e.system,
                    zone: e.zone,
                    source_id: e.path.clone(),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub subset: String,
    pub expected: ClassCounts,
    pub observed: ClassCounts,
    pub missing: Vec<String>,
    pub digest_mismatches: Vec<String>,
    /// Entries whose file header label disagrees with the manifest.
    pub label_mismatches: Vec<String>,
    /// `Some(true)` when the subset has published counts and they match.
    pub matches_reference: Option<bool>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.missing.is_empty()
            && self.digest_mismatches.is_empty()
            && self.label_mismatches.is_empty()
            && self.observed == self.expected
            && self.expected.per_class.iter().sum::<usize>() <= self.expected.total
    }
}

impl std::fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let [a, b, c] = self.observed.per_class;
        let [ea, eb, ec] = self.expected.per_class;
        writeln!(f, "{}: {}", self.subset, if self.passed() { "OK" } else { "FAILED" })?;
        writeln!(f, "  classes  {a}/{b}/{c} (expected {ea}/{eb}/{ec})")?;
        writeln!(f, "  total    {} (expected {})", self.observed.total, self.expected.total)?;
        if let Some(m) = self.matches_reference {
            writeln!(f, "  published counts: {}", if m { "match" } else { "MISMATCH" })?;
        }
        for p in &self.missing {
            writeln!(f, "  missing  {p}")?;
        }
        for p in &self.digest_mismatches {
            writeln!(f, "  digest   {p}")?;
        }
        for p in &self.label_mismatches {
            writeln!(f, "  label    {p}")?;
        }
        Ok(())
    }
}

/// Checks files, digests and counts of a manifest rooted at `base`.
pub fn verify_manifest(manifest: &SubsetManifest, base: &Path) -> VerificationReport {
    let mut report = VerificationReport {
        subset: manifest.subset.clone(),
        expected: manifest.counts,
        observed: ClassCounts::default(),
        missing: Vec::new(),
        digest_mismatches: Vec::new(),
        label_mismatches: Vec::new(),
        matches_reference: None,
    };
    for entry in &manifest.files {
        let full: PathBuf = base.join(&entry.path);
        let Ok(bytes) = fs::read(&full) else {
            report.missing.push(entry.path.clone());
            continue;
        };
        if sha256_hex(&bytes) != entry.digest {
            report.digest_mismatches.push(entry.path.clone());
        }
        let header_label = bytes.get(14).map(|&b| b as i8);
        let entry_label = entry.label.map_or(file::UNLABELED, |l| l as i8);
        if header_label != Some(entry_label) {
            report.label_mismatches.push(entry.path.clone());
        }
        report.observed.total += 1;
        if let Some(l) = entry.label {
            report.observed.per_class[l.index()] += 1;
        }
    }
    report.matches_reference = reference_counts(&manifest.subset).map(|r| r == report.observed && r == report.expected);
    report
}
