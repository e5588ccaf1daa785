//! CSI amplitude spectrograms for activity recognition: log parsing,
//! segmentation, seeded augmentation, dataset bookkeeping and an ablation
//! harness around a compact reference classifier.

pub mod augment;
pub mod csi;
pub mod dataset;
pub mod file;
pub mod harness;
pub mod preview;
pub mod rng;
pub mod spectro;

pub use spectro::Spectrogram;
