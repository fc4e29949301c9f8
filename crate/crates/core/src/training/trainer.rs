//! The train/validate loop with early stopping and best-weight restore.

use rayon::prelude::*;

use crate::data::{Batch, BatchStream, EvalSet};
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_THRESHOLD;
use crate::nn::{batch_dropout_seeds, AdamConfig, AdamState, Model};
use crate::tensor::Tensor;
use crate::training::{ArchitectureSpec, TrainingConfig, TrainingHistory, INPUT_SHAPE};

/// Per-class probability pair. Class 0 is non-consolidation, class 1 is
/// consolidation.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Prediction {
    pub probs: [f64; 2],
}

impl Prediction {
    pub fn non_consolidation(&self) -> f64 {
        self.probs[0]
    }

    pub fn consolidation(&self) -> f64 {
        self.probs[1]
    }

    pub fn predicted_class(&self) -> usize {
        usize::from(self.probs[1] >= DEFAULT_THRESHOLD)
    }
}

/// Builds a freshly initialized model for an architecture.
pub fn build_model(spec: &ArchitectureSpec, seed: u64) -> Result<Model<f32>> {
    spec.validate()?;
    let mut rng = crate::rng::seeded_rng(seed, &[0x1417]);
    Model::new(&INPUT_SHAPE, spec.layer_stack(), &mut rng)
}

/// Inference over a `[b, H, W, C]` batch. Every sample is processed
/// independently, so probabilities do not depend on batch composition.
pub fn predict(model: &Model<f32>, images: &Tensor<f32>) -> Result<Vec<Prediction>> {
    if images.shape().len() != 4 || images.shape()[1..] != *model.input_shape() {
        return Err(Error::shape(format!(
            "predict expects [b, {:?}] images, got {:?}",
            model.input_shape(),
            images.shape()
        )));
    }
    let b = images.shape()[0];
    (0..b)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&i| {
            let sample = model.extract_sample(images, i)?;
            let probs = model.predict_one(&sample)?;
            Ok(Prediction {
                probs: [probs[0], probs[1]],
            })
        })
        .collect()
}

/// Inference over a preprocessed evaluation set, batch by batch.
pub fn predict_eval_set(model: &Model<f32>, eval: &EvalSet) -> Result<Vec<Prediction>> {
    let mut out = Vec::with_capacity(eval.len());
    for batch in &eval.batches {
        out.extend(predict(model, &batch.images)?);
    }
    Ok(out)
}

/// Validation cross-entropy (no L2 term) and accuracy at the 0.5 threshold
/// on the class-1 probability, in inference mode.
fn validation_pass(model: &Model<f32>, val: &EvalSet) -> Result<(f64, f64)> {
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for batch in &val.batches {
        let b = batch.indices.len();
        let (loss, _) = model.loss_and_grad(&batch.images, &batch.labels, 0.0, None)?;
        loss_sum += loss * b as f64;
        let preds = predict(model, &batch.images)?;
        for (pred, row) in preds.iter().zip(batch.labels.data().chunks(2)) {
            let truth = usize::from(row[1] > 0.5);
            if pred.predicted_class() == truth {
                correct += 1;
            }
        }
    }
    let n = val.len() as f64;
    Ok((loss_sum / n, correct as f64 / n))
}

/// Trains `model` in place. Runs full augmented epochs with Adam updates,
/// evaluates on `val` in inference mode after each epoch, stops after
/// `patience` epochs without validation-loss improvement (or at max_epochs),
/// and restores the weights of the best epoch before returning.
pub fn train(
    model: &mut Model<f32>,
    stream: &mut BatchStream,
    val: &EvalSet,
    cfg: &TrainingConfig,
) -> Result<TrainingHistory> {
    cfg.validate()?;
    if val.is_empty() {
        return Err(Error::Config("validation set is empty".into()));
    }
    let mut adam = AdamState::new(model.params(), AdamConfig::with_learning_rate(cfg.learning_rate));
    let mut history = TrainingHistory::default();
    let mut best_loss = f64::INFINITY;
    let mut best_params: Option<Vec<Tensor<f32>>> = None;
    let mut epochs_without_improvement = 0usize;

    for epoch in 0..cfg.max_epochs {
        let mut epoch_loss = 0.0;
        let mut samples = 0usize;
        stream.for_each_batch(|step, batch: Batch| {
            let b = batch.indices.len();
            let seeds = batch_dropout_seeds(cfg.seed, epoch, step, b);
            let (loss, grads) =
                model.loss_and_grad(&batch.images, &batch.labels, cfg.l2_strength, Some(&seeds))?;
            if !loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    batch: step,
                    message: format!("loss became {loss}"),
                });
            }
            adam.step(model.params_mut(), &grads).map_err(|e| Error::Training {
                epoch,
                batch: step,
                message: e.to_string(),
            })?;
            epoch_loss += loss * b as f64;
            samples += b;
            Ok(())
        })?;

        let (val_loss, val_acc) = validation_pass(model, val)?;
        history.train_loss.push(epoch_loss / samples as f64);
        history.val_loss.push(val_loss);
        history.val_accuracy.push(val_acc);

        if val_loss < best_loss {
            best_loss = val_loss;
            history.best_epoch = epoch;
            best_params = Some(model.params().to_vec());
            epochs_without_improvement = 0;
        } else {
            epochs_without_improvement += 1;
            if epochs_without_improvement >= cfg.patience {
                break;
            }
        }
    }

    if let Some(best) = best_params {
        model.params_mut().clone_from_slice(&best);
    }
    Ok(history)
}
