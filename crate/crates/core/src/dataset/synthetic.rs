//! Synthetic datasets for tests and offline checks.

use std::fs;
use std::path::{Path, PathBuf};

use super::manifest::{FileEntry, ManifestError, SubsetManifest, REFERENCE_COUNTS};
use super::{Activity, Sample};
use crate::file;
use crate::rng::{tag, Stream};
use crate::spectro::Spectrogram;

/// Writes a stand-in for the four published subsets: one small random
/// spectrogram per sample, with exactly the published class counts. Returns
/// the manifest paths, one per subset, named `<subset>.json` under `dir`.
pub fn write_reference_dataset(dir: &Path, width: usize, height: usize, seed: u64) -> Result<Vec<PathBuf>, ManifestError> {
    let mut manifests = Vec::new();
    for (s, (name, scenario, system, counts)) in REFERENCE_COUNTS.iter().enumerate() {
        let sub = dir.join(name);
        fs::create_dir_all(&sub).map_err(|source| ManifestError::Io { path: sub.display().to_string(), source })?;
        let mut stream = Stream::derive(seed, &[tag(b"refdata"), s as u64]);
        let mut entries = Vec::new();
        for (class, &n) in counts.iter().enumerate() {
            for i in 0..n {
                let spec = Spectrogram::from_fn(width, height, |_, _| stream.uniform() * (1.0 + class as f64));
                let rel = format!("{name}/{class}_{i:04}.csis");
                file::write_file(&dir.join(&rel), &spec, class as i8)?;
                entries.push(FileEntry {
                    path: rel,
                    label: Some(Activity::ALL[class]),
                    scenario: Some(*scenario),
                    system: Some(*system),
                    zone: (class > 0).then_some((i % 5) as u8 + 1),
                    digest: String::new(),
                });
            }
        }
        let manifest = SubsetManifest::build(*name, entries, dir)?;
        let path = dir.join(format!("{name}.json"));
        manifest.save(&path)?;
        manifests.push(path);
    }
    Ok(manifests)
}

/// Where class evidence sits in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlobPlacement {
    /// Every sample starts its pattern at this column.
    Fixed(usize),
    /// Each sample draws a uniformly random circular offset.
    Random,
}

/// Three-class dataset whose evidence is a localized time pattern.
///
/// Every sample carries a bright blob covering `blob_width` columns over
/// a band of subcarrier rows on top of a noisy floor. Classes differ in
/// the temporal profile of the blob, and every profile has the same mean:
///
/// * class 0: one flat block,
/// * class 1: two brighter blocks separated by a dark gap,
/// * class 2: a ramp rising across the blob.
///
/// The pattern is laid out starting at column 0 and then circularly shifted
/// to its placement, so a random placement can wrap across the edges.
///
/// The defaults build a shift-transfer task for the reference classifier.
/// Trained at [`ShiftedBlobs::straddling_offset`], a classifier only sees the
/// blob split across the two image edges, and the narrow width lets its
/// receptive field reach the padding from anywhere. Without shift
/// augmentation it keys on edge-anchored features that do not survive a
/// random placement.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedBlobs {
    pub width: usize,
    pub height: usize,
    pub blob_width: usize,
    pub noise: f64,
    pub per_class: usize,
}

impl Default for ShiftedBlobs {
    fn default() -> Self {
        Self { width: 32, height: 8, blob_width: 12, noise: 0.3, per_class: 100 }
    }
}

impl ShiftedBlobs {
    /// Signal level at blob column `j`. Every profile averages 1 over the
    /// blob, so total brightness carries no class information.
    fn profile(&self, class: usize, j: usize) -> f64 {
        let b = self.blob_width;
        match class {
            0 => 1.0,
            1 => {
                let third = b as f64 / 3.0;
                let x = j as f64 + 0.5;
                if x < third || x > b as f64 - third {
                    1.5
                } else {
                    0.0
                }
            }
            _ => 2.0 * (j as f64 + 0.5) / b as f64,
        }
    }

    /// Offset that centers the blob on the wrap point.
    pub fn straddling_offset(&self) -> usize {
        self.width - self.blob_width / 2
    }

    pub fn sample(&self, class: usize, offset: usize, stream: &mut Stream) -> Spectrogram {
        let (w, h, b) = (self.width, self.height, self.blob_width);
        let band = h / 4..h - h / 4;
        Spectrogram::from_fn(w, h, |t, k| {
            let j = (t + w - offset % w) % w;
            let signal = if j < b && band.contains(&k) { 2.0 * self.profile(class, j) } else { 0.0 };
            1.0 + signal + self.noise * stream.uniform()
        })
    }

    pub fn generate(&self, placement: BlobPlacement, seed: u64) -> Vec<Sample> {
        let mut stream = Stream::derive(seed, &[tag(b"blobs")]);
        let mut out = Vec::with_capacity(3 * self.per_class);
        for class in 0..3 {
            for i in 0..self.per_class {
                let offset = match placement {
                    BlobPlacement::Fixed(t) => t,
                    BlobPlacement::Random => stream.below(self.width as u64) as usize,
                };
                let spec = self.sample(class, offset, &mut stream);
                out.push(Sample::new(spec, Activity::ALL[class], format!("blob{class}-{i}")));
            }
        }
        out
    }
}
