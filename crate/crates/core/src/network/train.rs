//! Class-balanced mini-batch training with holdout early stopping.

use std::fmt;
use std::ops::ControlFlow;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamState};
use super::loss::weighted_cross_entropy;
use super::model::{InputBatch, NetworkWeights};
use super::{Real, TrainConfig};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::features::{augment, IcFeatures};
use crate::labels::{LabelVector, NUM_CLASSES};

pub type Example = (IcFeatures, LabelVector);

/// Draws a category uniformly among those present, then an example of that
/// category (by label argmax) uniformly with replacement.
#[derive(Debug, Clone)]
pub struct ClassBalancedSampler {
    by_category: Vec<Vec<usize>>,
}

impl ClassBalancedSampler {
    pub fn new(labels: &[LabelVector]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset("nothing to sample from".into()));
        }
        let mut by_category = vec![Vec::new(); NUM_CLASSES];
        for (i, l) in labels.iter().enumerate() {
            by_category[l.argmax().index()].push(i);
        }
        by_category.retain(|v| !v.is_empty());
        Ok(ClassBalancedSampler { by_category })
    }

    pub fn n_present(&self) -> usize {
        self.by_category.len()
    }

    pub fn sample(&self, batch_size: usize, rng: &mut impl Rng) -> Vec<usize> {
        (0..batch_size)
            .map(|_| {
                let members = &self.by_category[rng.gen_range(0..self.by_category.len())];
                members[rng.gen_range(0..members.len())]
            })
            .collect()
    }
}

/// One class-balanced batch of example indices.
pub fn sample_batch(labels: &[LabelVector], batch_size: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    Ok(ClassBalancedSampler::new(labels)?.sample(batch_size, rng))
}

/// Mean weighted cross entropy of the plain forward pass.
pub fn validation_loss<T: Real>(
    weights: &NetworkWeights<T>,
    set: &[Example],
    class_weights: &[f64; NUM_CLASSES],
    exec: Execution,
) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptyDataset("validation set".into()));
    }
    let features: Vec<IcFeatures> = set.iter().map(|(f, _)| f.clone()).collect();
    let preds = weights.forward_many(&features, exec)?;
    let total: f64 = preds
        .iter()
        .zip(set)
        .map(|(p, (_, t))| weighted_cross_entropy(p, t, class_weights))
        .sum();
    Ok(total / set.len() as f64)
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub batch: u64,
    /// Mean training loss over the batches since the previous record.
    pub train_loss: f64,
    pub validation_loss: f64,
}

impl fmt::Display for LogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:.9} {:.9}", self.batch, self.train_loss, self.validation_loss)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// No validation improvement within the early-stopping window.
    EarlyStop,
    MaxBatches,
    /// The checkpoint monitor asked to stop.
    Halted,
}

/// State handed to the monitor after every validation evaluation.
pub struct Checkpoint<'a, T> {
    pub record: LogRecord,
    pub best_validation_loss: f64,
    pub best_batch: u64,
    pub improved: bool,
    pub weights: &'a NetworkWeights<T>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Weights with the lowest validation loss seen.
    pub weights: NetworkWeights<T>,
    pub best_batch: u64,
    pub best_validation_loss: f64,
    /// Weights after the last optimizer step.
    pub final_weights: NetworkWeights<T>,
    pub batches_run: u64,
    pub stop_reason: StopReason,
    pub log: Vec<LogRecord>,
}

pub fn train<T: Real>(train_set: &[Example], validation_set: &[Example], config: &TrainConfig) -> Result<TrainOutcome<T>> {
    train_with_monitor(train_set, validation_set, config, |_| ControlFlow::Continue(()))
}

/// Training loop. Weights are initialised from `config.seed`; every random
/// draw comes from the same seeded stream, so the result is a pure function
/// of the data and the configuration.
pub fn train_with_monitor<T: Real>(
    train_set: &[Example],
    validation_set: &[Example],
    config: &TrainConfig,
    mut monitor: impl FnMut(&Checkpoint<'_, T>) -> ControlFlow<()>,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset("training set".into()));
    }
    if validation_set.is_empty() {
        return Err(Error::EmptyDataset("validation set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut weights = NetworkWeights::<T>::init(&mut rng);
    let mut state = AdamState::new(&weights);

    let augmented: Vec<Example> = train_set.iter().flat_map(|(f, l)| augment(f, *l)).collect();
    let labels: Vec<LabelVector> = augmented.iter().map(|(_, l)| *l).collect();
    let sampler = ClassBalancedSampler::new(&labels)?;

    // Only checkpoints compete for best, so the returned weights always match a logged record.
    let mut best_validation_loss = f64::INFINITY;
    let mut best_weights = weights.clone();
    let mut best_batch = 0u64;
    let mut log = Vec::new();
    let mut running = (0.0, 0u64);
    let mut batch = 0u64;

    let stop_reason = loop {
        batch += 1;
        let idx = sampler.sample(config.batch_size, &mut rng);
        let mut inputs = InputBatch::<T>::from_features(idx.iter().map(|&i| &augmented[i].0));
        inputs.add_noise(config.input_noise_sigma, &mut rng);
        let targets: Vec<LabelVector> = idx.iter().map(|&i| augmented[i].1).collect();
        let (loss, grads) = weights.batch_gradient(&inputs, &targets, &config.class_weights, config.execution)?;
        adam_step(&mut weights, &grads, &mut state, config)?;
        running.0 += loss;
        running.1 += 1;

        let at_limit = config.max_batches == Some(batch);
        if batch % config.validation_interval == 0 || at_limit {
            let val = validation_loss(&weights, validation_set, &config.class_weights, config.execution)?;
            if !val.is_finite() {
                return Err(Error::Divergence { batch, loss: val });
            }
            let improved = val < best_validation_loss;
            if improved {
                best_validation_loss = val;
                best_weights = weights.clone();
                best_batch = batch;
            }
            let record = LogRecord {
                batch,
                train_loss: running.0 / running.1 as f64,
                validation_loss: val,
            };
            running = (0.0, 0);
            log::info!("{record} (best {best_validation_loss:.6} at {best_batch})");
            log.push(record);
            let checkpoint = Checkpoint {
                record,
                best_validation_loss,
                best_batch,
                improved,
                weights: &weights,
            };
            if monitor(&checkpoint).is_break() {
                break StopReason::Halted;
            }
            if batch - best_batch >= config.early_stop_window {
                break StopReason::EarlyStop;
            }
        }
        if at_limit {
            break StopReason::MaxBatches;
        }
    };

    Ok(TrainOutcome {
        weights: best_weights,
        best_batch,
        best_validation_loss,
        final_weights: weights,
        batches_run: batch,
        stop_reason,
        log,
    })
}
