//! The `workload.trainer` class: the LSTM benchmark exposed as active
//! methods on a persistent object. All heavy state (series, model,
//! optimizer moments) lives in the object's attributes; clients drive it
//! through stubs and only ever see scalar results, histories and
//! metrics.

use aos_core::{
    AttrMap, ClassDescriptor, FloatArray, MethodCtx, MethodError, MethodTable, Registry, Value,
    ValueKind,
};

use crate::convert::{need_float, need_int, need_positive};
use crate::lstm::metrics::evaluate;
use crate::lstm::model::{AdamState, Gradients, LstmModel};
use crate::lstm::series::{
    generate_synthetic_series, load_series_csv, TimeSeriesDataset, COVARIATES,
};
use crate::lstm::train::{train, TrainConfig};
use crate::lstm::window::make_windows;

pub const TRAINER_CLASS: &str = "workload.trainer";
pub const TRAIN_FRACTION: f64 = 0.8;

pub fn trainer_descriptor() -> ClassDescriptor {
    ClassDescriptor::new(TRAINER_CLASS)
        .attribute("series", ValueKind::FloatArray)
        .attribute("bounds", ValueKind::FloatArray)
        .attribute("window", ValueKind::Int)
        .attribute("hidden", ValueKind::Int)
        .attribute("model", ValueKind::List)
        .attribute("history", ValueKind::List)
        .method(
            "load_synthetic",
            vec![ValueKind::Int, ValueKind::Int],
            ValueKind::Int,
        )
        .method("load_csv", vec![ValueKind::Text], ValueKind::Int)
        .method(
            "train",
            vec![ValueKind::Int, ValueKind::Int, ValueKind::Float, ValueKind::Int],
            ValueKind::List,
        )
        .method("evaluate", vec![], ValueKind::List)
}

/// Fresh attribute map for creating a trainer object.
pub fn initial_trainer_attrs(window: usize, hidden: usize) -> AttrMap {
    let mut attrs = AttrMap::new();
    attrs.insert("series".into(), Value::FloatArray(FloatArray::empty()));
    attrs.insert("bounds".into(), Value::FloatArray(FloatArray::empty()));
    attrs.insert("window".into(), Value::Int(window as i64));
    attrs.insert("hidden".into(), Value::Int(hidden as i64));
    attrs.insert("model".into(), Value::List(vec![]));
    attrs.insert("history".into(), Value::List(vec![]));
    attrs
}

fn store_dataset(attrs: &mut AttrMap, ds: &TimeSeriesDataset) -> Result<i64, MethodError> {
    let window = attrs
        .get("window")
        .and_then(|v| v.as_int())
        .ok_or_else(|| MethodError::failed("trainer has no window attribute"))? as usize;
    if ds.rows() <= window {
        return Err(MethodError::failed(format!(
            "dataset too short: {} rows for window {window}",
            ds.rows()
        )));
    }
    let rows = ds.rows();
    attrs.insert(
        "series".into(),
        Value::float_array(vec![rows, ds.covariates()], ds.normalized().to_vec())
            .map_err(|e| MethodError::failed(e.to_string()))?,
    );
    let bounds_flat: Vec<f64> = ds.bounds().iter().flat_map(|&(lo, hi)| [lo, hi]).collect();
    attrs.insert(
        "bounds".into(),
        Value::float_array(vec![ds.covariates(), 2], bounds_flat)
            .map_err(|e| MethodError::failed(e.to_string()))?,
    );
    Ok(rows as i64)
}

fn dataset_from_attrs(attrs: &AttrMap) -> Result<TimeSeriesDataset, MethodError> {
    let series = attrs
        .get("series")
        .and_then(|v| v.as_float_array())
        .ok_or_else(|| MethodError::failed("no series loaded"))?;
    let bounds = attrs
        .get("bounds")
        .and_then(|v| v.as_float_array())
        .ok_or_else(|| MethodError::failed("no bounds stored"))?;
    let [rows, covariates] = *series.shape() else {
        return Err(MethodError::failed("series must be a rank-2 array"));
    };
    if rows == 0 {
        return Err(MethodError::failed("no series loaded"));
    }
    let bounds: Vec<(f64, f64)> = bounds.data().chunks(2).map(|c| (c[0], c[1])).collect();
    if bounds.len() != covariates {
        return Err(MethodError::failed("bounds do not match the series"));
    }
    Ok(TimeSeriesDataset::from_normalized(
        rows,
        covariates,
        series.data().to_vec(),
        bounds,
    ))
}

fn model_to_value(model: &LstmModel, adam: &AdamState) -> Value {
    let fa = |shape: Vec<usize>, data: &[f64]| {
        Value::float_array(shape, data.to_vec()).expect("consistent model shapes")
    };
    let (k, h) = (model.input_size, model.hidden_size);
    Value::List(vec![
        Value::Int(k as i64),
        Value::Int(h as i64),
        fa(vec![k, 4 * h], &model.w_ih),
        fa(vec![h, 4 * h], &model.w_hh),
        fa(vec![4 * h], &model.b),
        fa(vec![h, k], &model.w_fc),
        fa(vec![k], &model.b_fc),
        Value::FloatArray(FloatArray::vector(adam.m.flatten())),
        Value::FloatArray(FloatArray::vector(adam.v.flatten())),
        Value::Int(adam.step as i64),
    ])
}

fn model_from_value(value: &Value) -> Result<(LstmModel, AdamState), MethodError> {
    let items = value
        .as_list()
        .ok_or_else(|| MethodError::failed("model attribute is not a list"))?;
    if items.len() != 10 {
        return Err(MethodError::failed("no trained model stored"));
    }
    let k = items[0].as_int().ok_or_else(|| MethodError::failed("bad model"))? as usize;
    let h = items[1].as_int().ok_or_else(|| MethodError::failed("bad model"))? as usize;
    let arr = |i: usize| -> Result<Vec<f64>, MethodError> {
        Ok(items[i]
            .as_float_array()
            .ok_or_else(|| MethodError::failed("bad model tensor"))?
            .data()
            .to_vec())
    };
    let mut model = LstmModel::zeros(k, h);
    model.w_ih = arr(2)?;
    model.w_hh = arr(3)?;
    model.b = arr(4)?;
    model.w_fc = arr(5)?;
    model.b_fc = arr(6)?;

    let mut adam = AdamState::new(&model);
    let assign = |g: &mut Gradients, flat: &[f64]| {
        let mut at = 0;
        for t in [&mut g.w_ih, &mut g.w_hh, &mut g.b, &mut g.w_fc, &mut g.b_fc] {
            let n = t.len();
            t.copy_from_slice(&flat[at..at + n]);
            at += n;
        }
    };
    assign(&mut adam.m, &arr(7)?);
    assign(&mut adam.v, &arr(8)?);
    adam.step = items[9].as_int().ok_or_else(|| MethodError::failed("bad model"))? as u64;
    Ok((model, adam))
}

/// Baseline path: the exact function the active method runs, callable
/// in-process. Returns the per-epoch history rows as values.
pub fn run_training(attrs: &mut AttrMap, config: &TrainConfig) -> Result<Value, MethodError> {
    let ds = dataset_from_attrs(attrs)?;
    let window = attrs.get("window").and_then(|v| v.as_int()).unwrap_or(6) as usize;
    let hidden = attrs.get("hidden").and_then(|v| v.as_int()).unwrap_or(64) as usize;
    let windows =
        make_windows(&ds, window, TRAIN_FRACTION).map_err(|e| MethodError::failed(e.to_string()))?;
    let mut model = LstmModel::init(COVARIATES, hidden, config.seed);
    let mut adam = AdamState::new(&model);
    let outcome =
        train(&mut model, &mut adam, &windows, config).map_err(|e| MethodError::failed(e.to_string()))?;

    let history = Value::List(
        outcome
            .history
            .iter()
            .map(|e| {
                Value::List(vec![
                    Value::Int(e.epoch as i64),
                    Value::Float(e.train_mse),
                    Value::Float(e.val_mse),
                    Value::Float(e.seconds),
                ])
            })
            .collect(),
    );
    attrs.insert("model".into(), model_to_value(&model, &adam));
    attrs.insert("history".into(), history.clone());
    Ok(history)
}

/// Baseline path for evaluation; metrics on denormalized values plus the
/// serialized model size in MB.
pub fn run_evaluation(attrs: &AttrMap) -> Result<Value, MethodError> {
    let ds = dataset_from_attrs(attrs)?;
    let window = attrs.get("window").and_then(|v| v.as_int()).unwrap_or(6) as usize;
    let (model, _) = model_from_value(
        attrs
            .get("model")
            .ok_or_else(|| MethodError::failed("no model attribute"))?,
    )?;
    let windows =
        make_windows(&ds, window, TRAIN_FRACTION).map_err(|e| MethodError::failed(e.to_string()))?;
    let rows = evaluate(&model, &windows, &ds);
    let mut out: Vec<Value> = rows
        .iter()
        .map(|r| {
            Value::List(vec![
                Value::Float(r.mse),
                Value::Float(r.mae),
                Value::Float(r.smape),
                Value::Float(r.rmse),
            ])
        })
        .collect();
    out.push(Value::Float(model.size_bytes() as f64 / 1e6));
    Ok(Value::List(out))
}

pub fn trainer_table() -> MethodTable {
    MethodTable::new()
        .with("load_synthetic", |ctx: &mut MethodCtx<'_>| {
            let rows = need_positive(ctx.arg(0), "rows")?;
            let seed = need_int(ctx.arg(1), "seed")? as u64;
            let ds =
                generate_synthetic_series(rows, seed).map_err(|e| MethodError::failed(e.to_string()))?;
            Ok(Value::Int(store_dataset(ctx.attrs, &ds)?))
        })
        .with("load_csv", |ctx: &mut MethodCtx<'_>| {
            let path = ctx
                .arg(0)
                .as_text()
                .ok_or_else(|| MethodError::BadArgument("path: expected Text".into()))?;
            let ds = load_series_csv(std::path::Path::new(path))
                .map_err(|e| MethodError::failed(e.to_string()))?;
            Ok(Value::Int(store_dataset(ctx.attrs, &ds)?))
        })
        .with("train", |ctx: &mut MethodCtx<'_>| {
            let config = TrainConfig {
                epochs: need_positive(ctx.arg(0), "epochs")?,
                batch_size: need_positive(ctx.arg(1), "batch")?,
                learning_rate: need_float(ctx.arg(2), "learning rate")?,
                seed: need_int(ctx.arg(3), "seed")? as u64,
            };
            run_training(ctx.attrs, &config)
        })
        .with("evaluate", |ctx: &mut MethodCtx<'_>| run_evaluation(ctx.attrs))
}

pub fn register_trainer(registry: &Registry) -> Result<(), aos_core::RegistryError> {
    registry.register_class(trainer_descriptor(), Some(trainer_table()))
}
