//! Discriminative training: log-loss or list-wise ranking loss, analytic
//! gradients, AdaGrad with L2, early stopping on a development set.

mod adagrad;
mod check;
mod grad;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use adagrad::{adagrad_step, AdaGradState, ADAGRAD_EPS};
pub use check::{compare_gradients, finite_diff_check, max_rel_error, BlockCheck, FD_EPS, FD_FLOOR};
pub use grad::{gradients, gradients_with, loss, loss_with, BlockGrad, GradientSet};

use crate::error::{Error, Result};
use crate::features::FeatureInstance;
use crate::model::{Model, Task};
use crate::par::{self, Execution};
use crate::scoring::Scorer;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// Softmax over labels.
    Log,
    /// Softmax over candidates.
    Ranking,
}

impl Loss {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Classify { .. } => Loss::Log,
            Task::Rank => Loss::Ranking,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Loss::Log => "log",
            Loss::Ranking => "ranking",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum TrainMode {
    /// One instance at a time.
    #[default]
    Sequential,
    /// Gradients of `k` consecutive instances are computed in parallel
    /// against one parameter snapshot, then applied in order.
    SnapshotBatch(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub eta: f64,
    pub lambda: f64,
    pub epochs: usize,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub loss: Loss,
    pub mode: TrainMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta: 0.05,
            lambda: 0.005,
            epochs: 30,
            patience: 5,
            seed: 1,
            loss: Loss::Log,
            mode: TrainMode::Sequential,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if self.mode == TrainMode::SnapshotBatch(0) {
            return Err(Error::Config("snapshot batch size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean loss over the epoch's updates.
    pub train_loss: f64,
    pub dev_metric: f64,
    pub elapsed_ms: u128,
}

impl EpochRecord {
    /// Tab-separated log line.
    pub fn tsv(&self) -> String {
        format!(
            "{}\t{:.6}\t{:.6}\t{}",
            self.epoch, self.train_loss, self.dev_metric, self.elapsed_ms
        )
    }
}

/// Header of the tab-separated training log.
pub const LOG_HEADER: &str = "epoch\ttrain_loss\tdev_metric\telapsed_ms";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (1-based).
    pub best_epoch: usize,
    pub best_metric: f64,
}

/// Fraction of instances whose prediction is the gold choice: accuracy for
/// classification, accuracy@1 for ranking.
pub fn accuracy(model: &Model, insts: &[FeatureInstance], exec: Execution) -> Result<f64> {
    if insts.is_empty() {
        return Ok(0.0);
    }
    let scorer = Scorer::new(model);
    let preds = scorer.predict_batch(insts, exec)?;
    let hits = preds
        .iter()
        .zip(insts)
        .filter(|(p, i)| i.gold == Some(p.choice))
        .count();
    Ok(hits as f64 / insts.len() as f64)
}

/// Trains `model` in place; on return it holds the parameters of the best
/// dev epoch. An empty dev set falls back to training accuracy.
pub fn train(
    model: &mut Model,
    train_set: &[FeatureInstance],
    dev_set: &[FeatureInstance],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<History> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset("training set has no instances".into()));
    }
    if config.loss != Loss::for_task(model.task()) {
        return Err(Error::Config(format!(
            "{} loss does not fit a {} model",
            config.loss.name(),
            match model.task() {
                Task::Classify { .. } => "classification",
                Task::Rank => "ranking",
            }
        )));
    }
    let dev = if dev_set.is_empty() { train_set } else { dev_set };
    let eval_exec = Execution::Parallel;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = AdaGradState::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let start = Instant::now();
    let mut history = History {
        best_metric: f64::NEG_INFINITY,
        ..History::default()
    };
    let mut best = model.clone();
    let mut stale = 0;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        match config.mode {
            TrainMode::Sequential => {
                for &i in &order {
                    let (l, g) = gradients(model, &train_set[i])?;
                    adagrad_step(model, &g, &mut state, config.eta, config.lambda);
                    total += l;
                }
            }
            TrainMode::SnapshotBatch(k) => {
                for chunk in order.chunks(k) {
                    let snapshot: &Model = model;
                    let batch = par::try_map(Execution::Parallel, chunk, |&i| {
                        gradients(snapshot, &train_set[i])
                    })?;
                    for (l, g) in batch {
                        adagrad_step(model, &g, &mut state, config.eta, config.lambda);
                        total += l;
                    }
                }
            }
        }
        let metric = accuracy(model, dev, eval_exec)?;
        let record = EpochRecord {
            epoch,
            train_loss: total / train_set.len() as f64,
            dev_metric: metric,
            elapsed_ms: start.elapsed().as_millis(),
        };
        on_epoch(&record);
        history.epochs.push(record);
        if metric > history.best_metric {
            history.best_metric = metric;
            history.best_epoch = epoch;
            best = model.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    *model = best;
    Ok(history)
}
