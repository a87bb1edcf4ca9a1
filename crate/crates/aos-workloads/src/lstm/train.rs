//! Training loop: sequential batches in window order (no shuffling, the
//! final partial batch included), Adam updates, per-epoch train and
//! validation MSE. Deterministic for a fixed seed on one host.

use std::time::Instant;

use thiserror::Error;

use super::model::{adam_step, AdamState, LstmModel};
use super::window::WindowedSet;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 || self.batch_size == 0 || self.learning_rate < 0.0 {
            return Err(TrainError::BadConfig);
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("epochs and batch size must be positive, learning rate non-negative")]
    BadConfig,
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("no training windows")]
    EmptyTrainingSet,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<EpochStats>,
    pub train_seconds: f64,
}

/// Mean squared error over predictions of a window range, batched.
pub fn dataset_mse(
    model: &LstmModel,
    windows: &WindowedSet,
    start: usize,
    count: usize,
    batch_size: usize,
) -> f64 {
    let k = windows.covariates();
    let mut sse = 0.0;
    let mut at = 0;
    while at < count {
        let b = batch_size.min(count - at);
        let preds = model.predict(windows.input_block(start + at, b), b, windows.window());
        let targets = windows.target_block(start + at, b);
        for (p, t) in preds.iter().zip(targets) {
            let d = p - t;
            sse += d * d;
        }
        at += b;
    }
    sse / (count * k) as f64
}

pub fn train(
    model: &mut LstmModel,
    adam: &mut AdamState,
    windows: &WindowedSet,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let train_count = windows.train_count();
    if train_count == 0 {
        return Err(TrainError::EmptyTrainingSet);
    }
    let k = windows.covariates();
    let window = windows.window();
    let started = Instant::now();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let epoch_started = Instant::now();
        let mut sse = 0.0;
        let mut at = 0;
        while at < train_count {
            let b = config.batch_size.min(train_count - at);
            let x = windows.input_block(at, b);
            let targets = windows.target_block(at, b);
            let (preds, cache) = model.forward_batch(x, b, window);

            let scale = 2.0 / (b * k) as f64;
            let mut dpred = vec![0.0; b * k];
            for i in 0..b * k {
                let d = preds[i] - targets[i];
                sse += d * d;
                dpred[i] = scale * d;
            }

            let grads = model.backward_batch(x, b, window, &cache, &dpred);
            adam_step(model, &grads, adam, config.learning_rate);
            at += b;
        }
        let train_mse = sse / (train_count * k) as f64;
        if !train_mse.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        let val_mse = if windows.val_count() > 0 {
            dataset_mse(
                model,
                windows,
                windows.train_count(),
                windows.val_count(),
                config.batch_size,
            )
        } else {
            f64::NAN
        };
        history.push(EpochStats {
            epoch,
            train_mse,
            val_mse,
            seconds: epoch_started.elapsed().as_secs_f64(),
        });
    }
    Ok(TrainOutcome {
        history,
        train_seconds: started.elapsed().as_secs_f64(),
    })
}
