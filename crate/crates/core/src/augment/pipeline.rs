//! Gated, seeded composition of the augmentation operators.
//!
//! Each sample gets its own seed, `derive_seed(global_seed, [epoch, index])`,
//! and each operator kind draws from its own stream
//! `derive_seed(sample_seed, [kind_tag])`. Within that stream an operator
//! always draws its gate first and then every parameter, whether or not
//! the gate passes. Adding, removing or reordering operators therefore
//! never changes what any other operator draws.
//!
//! Operators run in the fixed order rotation, resized crop, amplitude,
//! contrast, independent of their order in the spec list.

use serde::{Deserialize, Serialize};

use super::ops::{
    amplitude_scale, circular_rotate, contrast_scale, draw_crop, random_channel_factors, resized_crop, CompressFill,
    CropDraw,
};
use super::AugmentError;
use crate::rng::{derive_seed, tag, Stream};
use crate::spectro::Spectrogram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugKind {
    #[serde(alias = "randomCircularRotation")]
    CircularRotation,
    #[serde(alias = "randomResizedCrop")]
    ResizedCrop,
    #[serde(alias = "randomAmplitude")]
    Amplitude,
    #[serde(alias = "randomContrast")]
    Contrast,
}

impl AugKind {
    pub const ALL: [AugKind; 4] = [AugKind::CircularRotation, AugKind::ResizedCrop, AugKind::Amplitude, AugKind::Contrast];

    /// Stream domain tag.
    pub fn tag(self) -> u64 {
        match self {
            AugKind::CircularRotation => tag(b"rotation"),
            AugKind::ResizedCrop => tag(b"rszcrop"),
            AugKind::Amplitude => tag(b"ampl"),
            AugKind::Contrast => tag(b"contrast"),
        }
    }

    /// Name used in reports.
    pub fn display_name(self) -> &'static str {
        match self {
            AugKind::CircularRotation => "randomCircularRotation",
            AugKind::ResizedCrop => "randomResizedCrop",
            AugKind::Amplitude => "randomAmplitude",
            AugKind::Contrast => "randomContrast",
        }
    }

    /// Default factor bounds for a spectrogram of width `w`.
    pub fn default_range(self, w: usize) -> (f64, f64) {
        match self {
            AugKind::CircularRotation => (1.0, w as f64),
            AugKind::ResizedCrop => (w as f64 / 2.0, w as f64),
            AugKind::Amplitude | AugKind::Contrast => (0.75, 1.25),
        }
    }
}

fn default_gate() -> f64 {
    0.5
}

/// One operator in a pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSpec {
    pub kind: AugKind,
    #[serde(default = "default_gate")]
    pub gate_p: f64,
    /// Factor bounds. `None` selects the width-dependent defaults.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<(f64, f64)>,
    /// Amplitude and contrast only: draw one factor for the whole
    /// spectrogram instead of one per subcarrier row.
    #[serde(default)]
    pub per_image: bool,
    /// Resized crop only: how the compress branch restores width.
    #[serde(default)]
    pub compress_fill: CompressFill,
}

impl AugmentationSpec {
    pub fn new(kind: AugKind) -> Self {
        Self { kind, gate_p: default_gate(), range: None, per_image: false, compress_fill: CompressFill::Tile }
    }

    pub fn with_gate(mut self, p: f64) -> Self {
        self.gate_p = p;
        self
    }

    pub fn with_range(mut self, lo: f64, hi: f64) -> Self {
        self.range = Some((lo, hi));
        self
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        if !(0.0..=1.0).contains(&self.gate_p) {
            return Err(AugmentError::Spec(format!("{:?}: gate_p {} outside [0, 1]", self.kind, self.gate_p)));
        }
        if let Some((lo, hi)) = self.range {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(AugmentError::Spec(format!("{:?}: bad range ({lo}, {hi})", self.kind)));
            }
            let positive = matches!(self.kind, AugKind::Amplitude | AugKind::Contrast | AugKind::ResizedCrop);
            if positive && lo <= 0.0 {
                return Err(AugmentError::Spec(format!("{:?}: range must be positive", self.kind)));
            }
            if self.kind == AugKind::CircularRotation && (lo < 0.0 || hi.floor() < lo.ceil()) {
                return Err(AugmentError::Spec(format!("rotation range ({lo}, {hi}) holds no integer >= 0")));
            }
        }
        Ok(())
    }
}

/// An augmentation pipeline. The empty pipeline is the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PipelineSpec {
    #[serde(default)]
    pub ops: Vec<AugmentationSpec>,
    #[serde(default)]
    pub global_seed: u64,
}

impl PipelineSpec {
    pub fn empty(global_seed: u64) -> Self {
        Self { ops: Vec::new(), global_seed }
    }

    pub fn new(ops: Vec<AugmentationSpec>, global_seed: u64) -> Result<Self, AugmentError> {
        let spec = Self { ops, global_seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        for (i, op) in self.ops.iter().enumerate() {
            op.validate()?;
            if self.ops[..i].iter().any(|o| o.kind == op.kind) {
                return Err(AugmentError::Spec(format!("operator {:?} listed twice", op.kind)));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Operators in application order.
    pub fn ordered(&self) -> Vec<&AugmentationSpec> {
        let mut ops: Vec<_> = self.ops.iter().collect();
        ops.sort_by_key(|o| o.kind);
        ops
    }
}

/// Identifies one augmentation of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SampleKey {
    pub epoch: u64,
    pub index: u64,
}

impl SampleKey {
    pub fn new(epoch: u64, index: u64) -> Self {
        Self { epoch, index }
    }

    pub fn seed(self, global_seed: u64) -> u64 {
        derive_seed(global_seed, &[self.epoch, self.index])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum OpParams {
    CircularRotation { n: usize },
    ResizedCrop(CropDraw),
    Amplitude { factors: Vec<f64> },
    Contrast { factors: Vec<f64> },
}

/// Draws of one operator for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpDraw {
    pub gate: f64,
    pub applied: bool,
    pub params: OpParams,
}

/// Every draw made while augmenting one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawLog {
    pub key: SampleKey,
    pub ops: Vec<OpDraw>,
}

fn draw_op(spec: &AugmentationSpec, stream: &mut Stream, w: usize, h: usize) -> OpDraw {
    let gate = stream.uniform();
    let (lo, hi) = spec.range.unwrap_or_else(|| spec.kind.default_range(w));
    let factors = |stream: &mut Stream| {
        if spec.per_image {
            vec![stream.uniform_in(lo, hi); h]
        } else {
            random_channel_factors(stream, h, lo, hi)
        }
    };
    let params = match spec.kind {
        AugKind::CircularRotation => {
            let lo_i = (lo.ceil().max(0.0) as u64).min(w as u64);
            let hi_i = (hi.floor() as u64).clamp(lo_i, w as u64);
            OpParams::CircularRotation { n: stream.int_in(lo_i, hi_i) as usize }
        }
        AugKind::ResizedCrop => OpParams::ResizedCrop(draw_crop(stream, w, lo, hi, spec.compress_fill)),
        AugKind::Amplitude => OpParams::Amplitude { factors: factors(stream) },
        AugKind::Contrast => OpParams::Contrast { factors: factors(stream) },
    };
    OpDraw { gate, applied: gate < spec.gate_p, params }
}

fn apply_params(x: &Spectrogram, params: &OpParams) -> Result<Spectrogram, AugmentError> {
    match params {
        OpParams::CircularRotation { n } => circular_rotate(x, *n),
        OpParams::ResizedCrop(d) => resized_crop(x, d.mode, d.c, d.start),
        OpParams::Amplitude { factors } => amplitude_scale(x, factors),
        OpParams::Contrast { factors } => contrast_scale(x, factors),
    }
}

/// Augments one sample. The spec must have passed [`PipelineSpec::validate`].
pub fn apply_pipeline(x: &Spectrogram, spec: &PipelineSpec, key: SampleKey) -> (Spectrogram, DrawLog) {
    let sample_seed = key.seed(spec.global_seed);
    let mut out = x.clone();
    let mut log = DrawLog { key, ops: Vec::with_capacity(spec.ops.len()) };
    for op in spec.ordered() {
        let mut stream = Stream::derive(sample_seed, &[op.kind.tag()]);
        let draw = draw_op(op, &mut stream, x.width(), x.height());
        if draw.applied {
            out = apply_params(&out, &draw.params).expect("drawn parameters are in range");
        }
        log.ops.push(draw);
    }
    (out, log)
}

/// Re-applies the operators recorded in `log`.
pub fn replay(x: &Spectrogram, log: &DrawLog) -> Result<Spectrogram, AugmentError> {
    log.ops
        .iter()
        .filter(|d| d.applied)
        .try_fold(x.clone(), |acc, d| apply_params(&acc, &d.params))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_pipeline(seed: u64) -> PipelineSpec {
        PipelineSpec::new(AugKind::ALL.iter().map(|&k| AugmentationSpec::new(k)).collect(), seed).unwrap()
    }

    fn sample(seed: u64) -> Spectrogram {
        let mut s = Stream::new(seed);
        Spectrogram::from_fn(40, 6, |_, _| s.uniform() * 5.0)
    }

    #[test]
    fn empty_pipeline_is_identity() {
        let x = sample(1);
        let (y, log) = apply_pipeline(&x, &PipelineSpec::empty(9), SampleKey::new(0, 0));
        assert_eq!(y, x);
        assert!(log.ops.is_empty());
    }

    #[test]
    fn closed_gates_are_identity() {
        let x = sample(2);
        let ops = AugKind::ALL.iter().map(|&k| AugmentationSpec::new(k).with_gate(0.0)).collect();
        let spec = PipelineSpec::new(ops, 0).unwrap();
        for seed in 0..50 {
            let spec = PipelineSpec { global_seed: seed, ..spec.clone() };
            let (y, log) = apply_pipeline(&x, &spec, SampleKey::new(seed, seed * 3));
            assert_eq!(y, x);
            assert_eq!(log.ops.len(), 4);
            assert!(log.ops.iter().all(|d| !d.applied));
        }
    }

    #[test]
    fn same_key_same_output() {
        let x = sample(3);
        let spec = full_pipeline(77);
        let a = apply_pipeline(&x, &spec, SampleKey::new(4, 12));
        let b = apply_pipeline(&x, &spec, SampleKey::new(4, 12));
        assert_eq!(a, b);
        let c = apply_pipeline(&x, &spec, SampleKey::new(4, 13));
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn replay_is_bit_exact() {
        let x = sample(4);
        let spec = full_pipeline(5);
        for i in 0..100 {
            let (y, log) = apply_pipeline(&x, &spec, SampleKey::new(0, i));
            assert_eq!(replay(&x, &log).unwrap(), y);
            let line = serde_json::to_string(&log).unwrap();
            let back: DrawLog = serde_json::from_str(&line).unwrap();
            assert_eq!(replay(&x, &back).unwrap(), y);
        }
    }

    #[test]
    fn removing_an_operator_keeps_other_draws() {
        let x = sample(6);
        let full = full_pipeline(42);
        for drop in AugKind::ALL {
            let ops = full.ops.iter().filter(|o| o.kind != drop).cloned().collect();
            let reduced = PipelineSpec::new(ops, 42).unwrap();
            for i in 0..20 {
                let key = SampleKey::new(1, i);
                let (_, a) = apply_pipeline(&x, &full, key);
                let (_, b) = apply_pipeline(&x, &reduced, key);
                let kept: Vec<_> = a.ops.iter().zip(full.ordered()).filter(|(_, s)| s.kind != drop).map(|(d, _)| d).collect();
                assert_eq!(kept, b.ops.iter().collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn list_order_does_not_matter() {
        let x = sample(7);
        let a = full_pipeline(3);
        let mut b = a.clone();
        b.ops.reverse();
        let key = SampleKey::new(2, 2);
        assert_eq!(apply_pipeline(&x, &a, key), apply_pipeline(&x, &b, key));
    }

    #[test]
    fn spec_validation() {
        let dup = vec![AugmentationSpec::new(AugKind::Amplitude), AugmentationSpec::new(AugKind::Amplitude)];
        assert!(PipelineSpec::new(dup, 0).is_err());
        assert!(AugmentationSpec::new(AugKind::Contrast).with_gate(1.5).validate().is_err());
        assert!(AugmentationSpec::new(AugKind::Contrast).with_range(1.2, 0.8).validate().is_err());
        assert!(AugmentationSpec::new(AugKind::Contrast).with_range(0.0, 0.8).validate().is_err());
        assert!(AugmentationSpec::new(AugKind::CircularRotation).with_range(1.2, 1.8).validate().is_err());
        assert!(AugmentationSpec::new(AugKind::CircularRotation).with_range(1.0, 4.0).validate().is_ok());
    }

    #[test]
    fn per_image_broadcasts_one_factor() {
        let x = sample(8);
        let mut op = AugmentationSpec::new(AugKind::Amplitude).with_gate(1.0);
        op.per_image = true;
        let spec = PipelineSpec::new(vec![op], 1).unwrap();
        let (_, log) = apply_pipeline(&x, &spec, SampleKey::new(0, 0));
        let OpParams::Amplitude { factors } = &log.ops[0].params else { panic!() };
        assert!(factors.iter().all(|f| *f == factors[0]));
    }

    #[test]
    fn spec_json_accepts_report_names() {
        let spec: PipelineSpec = serde_json::from_str(
            r#"{"ops":[{"kind":"randomCircularRotation"},{"kind":"contrast","gate_p":0.25,"range":[0.9,1.1]}],"global_seed":3}"#,
        )
        .unwrap();
        assert_eq!(spec.ops[0].kind, AugKind::CircularRotation);
        assert_eq!(spec.ops[0].gate_p, 0.5);
        assert_eq!(spec.ops[1].range, Some((0.9, 1.1)));
    }
}
