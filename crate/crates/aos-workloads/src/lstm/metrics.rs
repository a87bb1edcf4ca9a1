//! Forecast accuracy metrics, computed on denormalized predictions and
//! targets, per covariate.
//!
//! SMAPE uses the symmetric form (100/n)·Σ 2|ŷ−y|/(|y|+|ŷ|) with the
//! 0/0 → 0 convention, so its range is [0, 200]. RMSE is √MSE by
//! definition.

use super::model::LstmModel;
use super::series::TimeSeriesDataset;
use super::window::WindowedSet;

pub fn mse(pred: &[f64], target: &[f64]) -> f64 {
    assert_eq!(pred.len(), target.len());
    let sse: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    sse / pred.len() as f64
}

pub fn mae(pred: &[f64], target: &[f64]) -> f64 {
    assert_eq!(pred.len(), target.len());
    let sae: f64 = pred.iter().zip(target).map(|(p, t)| (p - t).abs()).sum();
    sae / pred.len() as f64
}

pub fn smape(pred: &[f64], target: &[f64]) -> f64 {
    assert_eq!(pred.len(), target.len());
    let total: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let denom = p.abs() + t.abs();
            if denom == 0.0 {
                0.0
            } else {
                2.0 * (p - t).abs() / denom
            }
        })
        .sum();
    100.0 * total / pred.len() as f64
}

pub fn rmse(pred: &[f64], target: &[f64]) -> f64 {
    mse(pred, target).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub covariate: usize,
    pub mse: f64,
    pub mae: f64,
    pub smape: f64,
    pub rmse: f64,
}

/// Evaluate a model on the validation windows, denormalizing predictions
/// and targets with the dataset bounds (which travel with the model
/// object, so this is self-contained as an active method).
pub fn evaluate(
    model: &LstmModel,
    windows: &WindowedSet,
    dataset: &TimeSeriesDataset,
) -> Vec<MetricRow> {
    let k = windows.covariates();
    let count = windows.val_count();
    assert!(count > 0, "empty validation set");
    let start = windows.train_count();

    let mut preds = Vec::with_capacity(count * k);
    let mut at = 0;
    while at < count {
        let b = 64.min(count - at);
        preds.extend(model.predict(
            windows.input_block(start + at, b),
            b,
            windows.window(),
        ));
        at += b;
    }

    (0..k)
        .map(|c| {
            let p: Vec<f64> = (0..count)
                .map(|i| dataset.denormalize(c, preds[i * k + c]))
                .collect();
            let t: Vec<f64> = (0..count)
                .map(|i| dataset.denormalize(c, windows.target(start + i)[c]))
                .collect();
            MetricRow {
                covariate: c,
                mse: mse(&p, &t),
                mae: mae(&p, &t),
                smape: smape(&p, &t),
                rmse: rmse(&p, &t),
            }
        })
        .collect()
}
