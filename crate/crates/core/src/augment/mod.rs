//! Spectrogram augmentations.
//!
//! [`ops`] holds the deterministic operators and their single-draw random
//! wrappers; [`pipeline`] composes them behind per-operator gates with
//! per-sample streams and an audit log of every draw.

pub mod ops;
pub mod pipeline;

use thiserror::Error;

pub use ops::{
    amplitude_scale, circular_rotate, contrast_scale, random_channel_factors, random_circular_rotation,
    random_resized_crop, resized_crop, row_means, CompressFill, CropDraw, CropMode,
};
pub use pipeline::{apply_pipeline, replay, AugKind, AugmentationSpec, DrawLog, OpDraw, OpParams, PipelineSpec, SampleKey};

#[derive(Debug, Error, PartialEq)]
pub enum AugmentError {
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("invalid pipeline: {0}")]
    Spec(String),
}
