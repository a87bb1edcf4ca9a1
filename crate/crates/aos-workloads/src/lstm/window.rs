//! Autoregressive windowing into a supervised set: window i is rows
//! i..i+L of the series and its target is row i+L, giving N = T − L
//! examples, split contiguously into train and validation.

use super::series::{SeriesError, TimeSeriesDataset};

#[derive(Debug, Clone)]
pub struct WindowedSet {
    inputs: Vec<f64>,
    targets: Vec<f64>,
    count: usize,
    window: usize,
    covariates: usize,
    train_count: usize,
}

impl WindowedSet {
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn covariates(&self) -> usize {
        self.covariates
    }

    pub fn train_count(&self) -> usize {
        self.train_count
    }

    pub fn val_count(&self) -> usize {
        self.count - self.train_count
    }

    /// L×k input rows of window `i`.
    pub fn input(&self, i: usize) -> &[f64] {
        let len = self.window * self.covariates;
        &self.inputs[i * len..(i + 1) * len]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.covariates..(i + 1) * self.covariates]
    }

    /// Contiguous flat views for batched math.
    pub fn input_block(&self, start: usize, count: usize) -> &[f64] {
        let len = self.window * self.covariates;
        &self.inputs[start * len..(start + count) * len]
    }

    pub fn target_block(&self, start: usize, count: usize) -> &[f64] {
        &self.targets[start * self.covariates..(start + count) * self.covariates]
    }
}

pub fn make_windows(
    ds: &TimeSeriesDataset,
    window: usize,
    train_fraction: f64,
) -> Result<WindowedSet, SeriesError> {
    if window < 1 {
        return Err(SeriesError::InvalidWindow);
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(SeriesError::InvalidSplit);
    }
    if ds.rows() <= window {
        return Err(SeriesError::TooShort {
            rows: ds.rows(),
            needed: window,
        });
    }
    let k = ds.covariates();
    let count = ds.rows() - window;
    let mut inputs = Vec::with_capacity(count * window * k);
    let mut targets = Vec::with_capacity(count * k);
    for i in 0..count {
        for t in 0..window {
            inputs.extend_from_slice(ds.row(i + t));
        }
        targets.extend_from_slice(ds.row(i + window));
    }
    let train_count = ((count as f64) * train_fraction).floor() as usize;
    Ok(WindowedSet {
        inputs,
        targets,
        count,
        window,
        covariates: k,
        train_count,
    })
}
