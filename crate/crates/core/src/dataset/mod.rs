//! Labeled samples, validation splits and class-balanced sampling.

pub mod manifest;
pub mod synthetic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::Stream;
use crate::spectro::Spectrogram;

pub use manifest::{verify_manifest, ClassCounts, FileEntry, SubsetManifest, VerificationReport};

pub const NUM_CLASSES: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("split: {0}")]
    Split(String),
    #[error("sampler: {0}")]
    Sampler(String),
    #[error("label {0} outside 0..=2")]
    Label(i64),
}

/// Activity class. The discriminant is the training label, which is also
/// how the class is serialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Activity {
    NoPresence = 0,
    Walking = 1,
    WalkingArmWaving = 2,
}

impl Activity {
    pub const ALL: [Activity; NUM_CLASSES] = [Activity::NoPresence, Activity::Walking, Activity::WalkingArmWaving];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: i64) -> Result<Self, DatasetError> {
        match i {
            0 => Ok(Activity::NoPresence),
            1 => Ok(Activity::Walking),
            2 => Ok(Activity::WalkingArmWaving),
            _ => Err(DatasetError::Label(i)),
        }
    }
}

impl From<Activity> for u8 {
    fn from(a: Activity) -> u8 {
        a as u8
    }
}

impl TryFrom<u8> for Activity {
    type Error = DatasetError;

    fn try_from(v: u8) -> Result<Self, DatasetError> {
        Activity::from_index(v as i64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "LOS")]
    Los,
    #[serde(rename = "NLOS")]
    Nlos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum System {
    #[serde(rename = "PIFA")]
    Pifa,
    #[serde(rename = "BQ")]
    Bq,
}

/// A labeled spectrogram with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub spectrogram: Spectrogram,
    pub label: Activity,
    pub scenario: Option<Scenario>,
    pub system: Option<System>,
    pub zone: Option<u8>,
    pub source_id: String,
}

impl Sample {
    pub fn new(spectrogram: Spectrogram, label: Activity, source_id: impl Into<String>) -> Self {
        Self { spectrogram, label, scenario: None, system: None, zone: None, source_id: source_id.into() }
    }
}

/// How to carve a validation set out of training data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub stratified: bool,
    pub split_seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.8, stratified: true, split_seed: 0 }
    }
}

/// Train count for `n` items, rounding toward train.
fn train_count(n: usize, fraction: f64) -> usize {
    // The epsilon keeps exact products such as 0.8 * 10 from rounding up.
    ((fraction * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Per-class member indices.
pub fn class_indices(samples: &[Sample]) -> [Vec<usize>; NUM_CLASSES] {
    let mut by_class: [Vec<usize>; NUM_CLASSES] = Default::default();
    for (i, s) in samples.iter().enumerate() {
        by_class[s.label.index()].push(i);
    }
    by_class
}

/// Splits sample indices into `(train, validation)`.
///
/// Within each class (or over all samples when not stratified) indices are
/// shuffled with a stream derived from the split seed, and the first
/// `ceil(fraction * n)` go to training. Both lists come back sorted.
pub fn split_indices(samples: &[Sample], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>), DatasetError> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(DatasetError::Split(format!("train fraction {} outside (0, 1)", spec.train_fraction)));
    }
    let groups: Vec<Vec<usize>> = if spec.stratified {
        let groups = class_indices(samples);
        if let Some(c) = groups.iter().position(Vec::is_empty) {
            return Err(DatasetError::Split(format!("class {c} has no samples")));
        }
        groups.into()
    } else {
        vec![(0..samples.len()).collect()]
    };
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (g, mut members) in groups.into_iter().enumerate() {
        Stream::derive(spec.split_seed, &[crate::rng::tag(b"split"), g as u64]).shuffle(&mut members);
        let k = train_count(members.len(), spec.train_fraction);
        train.extend_from_slice(&members[..k]);
        val.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

/// Splits samples into `(train, validation)` copies.
pub fn split(samples: &[Sample], spec: &SplitSpec) -> Result<(Vec<Sample>, Vec<Sample>), DatasetError> {
    let (tr, va) = split_indices(samples, spec)?;
    let pick = |idx: Vec<usize>| idx.into_iter().map(|i| samples[i].clone()).collect();
    Ok((pick(tr), pick(va)))
}

/// Class-balanced batch iterator over one epoch.
///
/// Each draw picks a class uniformly, then a member of that class
/// uniformly, both with replacement. An epoch yields `ceil(N / batch)`
/// batches and `N` draws in total, so the last batch may be short.
#[derive(Debug)]
pub struct BalancedBatches<'a> {
    by_class: [Vec<usize>; NUM_CLASSES],
    stream: &'a mut Stream,
    batch: usize,
    remaining: usize,
}

impl BalancedBatches<'_> {
    pub fn batches_per_epoch(&self) -> usize {
        self.remaining.div_ceil(self.batch)
    }
}

pub fn balanced_batches<'a>(
    samples: &[Sample],
    batch: usize,
    stream: &'a mut Stream,
) -> Result<BalancedBatches<'a>, DatasetError> {
    let labels: Vec<Activity> = samples.iter().map(|s| s.label).collect();
    balanced_batches_from_labels(&labels, batch, stream)
}

pub fn balanced_batches_from_labels<'a>(
    labels: &[Activity],
    batch: usize,
    stream: &'a mut Stream,
) -> Result<BalancedBatches<'a>, DatasetError> {
    if batch == 0 {
        return Err(DatasetError::Sampler("batch size must be at least 1".into()));
    }
    let mut by_class: [Vec<usize>; NUM_CLASSES] = Default::default();
    for (i, l) in labels.iter().enumerate() {
        by_class[l.index()].push(i);
    }
    if let Some(c) = by_class.iter().position(Vec::is_empty) {
        return Err(DatasetError::Sampler(format!("class {c} has no samples")));
    }
    Ok(BalancedBatches { by_class, stream, batch, remaining: labels.len() })
}

impl Iterator for BalancedBatches<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.remaining == 0 {
            return None;
        }
        let n = self.batch.min(self.remaining);
        self.remaining -= n;
        Some(
            (0..n)
                .map(|_| {
                    let members = &self.by_class[self.stream.below(NUM_CLASSES as u64) as usize];
                    members[self.stream.below(members.len() as u64) as usize]
                })
                .collect(),
        )
    }
}
