//! Single training runs and evaluation.

use rayon::prelude::*;

use super::model::{Adam, Classifier, CompactCnn, Trainable};
use super::{ExperimentSpec, HarnessError};
use crate::augment::{apply_pipeline, PipelineSpec, SampleKey};
use crate::dataset::{balanced_batches, Sample};
use crate::rng::{derive_seed, tag, Stream};

/// Fraction of samples whose argmax score is the true label.
pub fn evaluate<C: Classifier + ?Sized>(model: &C, samples: &[Sample]) -> Result<f64, HarnessError> {
    if samples.is_empty() {
        return Err(HarnessError::EmptyEvaluation);
    }
    let correct = samples.par_iter().filter(|s| model.predict(&s.spectrogram) == s.label.index()).count();
    Ok(correct as f64 / samples.len() as f64)
}

/// 1-based epoch of the highest accuracy; the earliest wins ties.
pub fn best_epoch(history: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &acc) in history.iter().enumerate() {
        if best.is_none_or(|b| acc > history[b]) {
            best = Some(i);
        }
    }
    best.map(|b| b + 1)
}

/// Seed of run `run_index` under experiment seed `seed`.
pub fn run_seed(seed: u64, run_index: usize) -> u64 {
    derive_seed(seed, &[tag(b"run"), run_index as u64])
}

/// Outcome of one successful run.
#[derive(Debug, Clone)]
pub struct TrainedRun<M> {
    /// Model restored to the best-validation checkpoint.
    pub model: M,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub val_history: Vec<f64>,
    pub loss_history: Vec<f64>,
}

/// Trains `model` in place of the reference network.
///
/// Each epoch draws `ceil(N / batch)` class-balanced batches from a stream
/// keyed by `(run seed, epoch)`. Training samples pass through `arm` with
/// key `(epoch, draw position)`; validation samples are never augmented.
pub fn train_with<M: Trainable>(
    mut model: M,
    arm: &PipelineSpec,
    train: &[Sample],
    val: &[Sample],
    cfg: &ExperimentSpec,
    run_index: usize,
) -> Result<TrainedRun<M>, HarnessError> {
    if train.is_empty() || val.is_empty() {
        return Err(HarnessError::EmptyEvaluation);
    }
    let seed = run_seed(cfg.seed, run_index);
    let pipeline = PipelineSpec { ops: arm.ops.clone(), global_seed: derive_seed(arm.global_seed, &[seed]) };
    let n = model.params().len();
    let mut adam = Adam::new(n, cfg.lr);
    let mut best = model.params().to_vec();
    let mut val_history = Vec::with_capacity(cfg.epochs);
    let mut loss_history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut stream = Stream::derive(seed, &[tag(b"sampler"), epoch as u64]);
        let batches = balanced_batches(train, cfg.batch, &mut stream)?;
        let mut position = 0u64;
        let mut epoch_loss = 0.0;
        for batch in batches {
            let model_ref = &model;
            let parts: Vec<(f64, Vec<f64>)> = batch
                .par_iter()
                .enumerate()
                .map(|(j, &idx)| {
                    let sample = &train[idx];
                    let augmented;
                    let x = if pipeline.is_empty() {
                        &sample.spectrogram
                    } else {
                        augmented = apply_pipeline(&sample.spectrogram, &pipeline, SampleKey::new(epoch as u64, position + j as u64)).0;
                        &augmented
                    };
                    let mut g = vec![0.0; n];
                    let loss = model_ref.accumulate_gradient(x, sample.label.index(), &mut g);
                    (loss, g)
                })
                .collect();
            position += batch.len() as u64;

            let mut grad = vec![0.0; n];
            let mut loss = 0.0;
            for (l, g) in &parts {
                loss += l;
                for (a, b) in grad.iter_mut().zip(g) {
                    *a += b;
                }
            }
            let scale = 1.0 / parts.len() as f64;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(HarnessError::Diverged { run: run_index, epoch: epoch + 1 });
            }
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.step(model.params_mut(), &grad);
            epoch_loss += loss;
        }
        loss_history.push(epoch_loss / train.len() as f64);
        let acc = evaluate(&model, val)?;
        if val_history.iter().all(|&a| acc > a) {
            best.copy_from_slice(model.params());
        }
        val_history.push(acc);
    }
    let best_epoch = best_epoch(&val_history).ok_or(HarnessError::Config(vec!["epochs: must be at least 1".into()]))?;
    model.params_mut().copy_from_slice(&best);
    Ok(TrainedRun { model, best_epoch, best_val_accuracy: val_history[best_epoch - 1], val_history, loss_history })
}

/// Trains the reference classifier for one run.
pub fn train_one(
    arm: &PipelineSpec,
    train: &[Sample],
    val: &[Sample],
    cfg: &ExperimentSpec,
    run_index: usize,
) -> Result<TrainedRun<CompactCnn>, HarnessError> {
    let side = CompactCnn::min_input_side(&cfg.classifier);
    if let Some(s) = train.iter().chain(val).find(|s| s.spectrogram.height() < side || s.spectrogram.width() < side) {
        return Err(HarnessError::Config(vec![format!(
            "classifier: input {}x{} of sample {} is smaller than {side} on a side, pooling would leave no features",
            s.spectrogram.width(),
            s.spectrogram.height(),
            s.source_id
        )]));
    }
    let model = CompactCnn::new(cfg.classifier.clone(), run_seed(cfg.seed, run_index));
    train_with(model, arm, train, val, cfg, run_index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Activity, NUM_CLASSES};
    use crate::spectro::Spectrogram;

    struct Constant(usize);

    impl Classifier for Constant {
        fn scores(&self, _: &Spectrogram) -> [f64; NUM_CLASSES] {
            let mut s = [0.0; NUM_CLASSES];
            s[self.0] = 1.0;
            s
        }
    }

    /// Looks each input up by its first value.
    struct Memorizer(Vec<(f64, usize)>);

    impl Classifier for Memorizer {
        fn scores(&self, x: &Spectrogram) -> [f64; NUM_CLASSES] {
            let label = self.0.iter().find(|(v, _)| *v == x.values()[0]).map_or(0, |p| p.1);
            let mut s = [0.0; NUM_CLASSES];
            s[label] = 1.0;
            s
        }
    }

    fn balanced(n: usize) -> Vec<Sample> {
        (0..3 * n)
            .map(|i| Sample::new(Spectrogram::from_fn(4, 2, |_, _| i as f64), Activity::ALL[i % 3], format!("{i}")))
            .collect()
    }

    #[test]
    fn constant_model_gets_a_third() {
        assert!((evaluate(&Constant(1), &balanced(10)).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn memorizer_gets_everything() {
        let data = balanced(5);
        let m = Memorizer(data.iter().map(|s| (s.spectrogram.values()[0], s.label.index())).collect());
        assert_eq!(evaluate(&m, &data).unwrap(), 1.0);
    }

    #[test]
    fn empty_evaluation_fails() {
        assert!(matches!(evaluate(&Constant(0), &[]), Err(HarnessError::EmptyEvaluation)));
    }

    #[test]
    fn checkpoint_tie_break() {
        assert_eq!(best_epoch(&[0.5, 0.8, 0.8]), Some(2));
        assert_eq!(best_epoch(&[0.3]), Some(1));
        assert_eq!(best_epoch(&[]), None);
    }
}
