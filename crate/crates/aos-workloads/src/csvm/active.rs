//! The `csvm.block` class: one data block living on its home backend.
//! Leaf training runs next to the points; merging fetches only the other
//! block's model (its SV payload), never raw data.

use aos_core::{
    AttrMap, ClassDescriptor, MethodCtx, MethodError, MethodTable, Registry, Value, ValueKind,
};

use crate::convert::{matrix_to_value, value_to_matrix};
use crate::csvm::cascade::merge_models;
use crate::csvm::smo::{kkt_violations, train_smo, Kernel, SmoParams, SvmModel};
use crate::tensor::Matrix;

pub const BLOCK_CLASS: &str = "csvm.block";

pub fn block_descriptor() -> ClassDescriptor {
    ClassDescriptor::new(BLOCK_CLASS)
        .attribute("points", ValueKind::FloatArray)
        .attribute("labels", ValueKind::FloatArray)
        .attribute("c", ValueKind::Float)
        .attribute("kernel", ValueKind::Text)
        .attribute("gamma", ValueKind::Float)
        .attribute("model", ValueKind::List)
        .method(
            "train_leaf",
            vec![ValueKind::FloatArray, ValueKind::FloatArray],
            ValueKind::Int,
        )
        .method("merge_from", vec![ValueKind::ObjectRef], ValueKind::Int)
        .method(
            "count_violations",
            vec![ValueKind::FloatArray, ValueKind::FloatArray, ValueKind::Float],
            ValueKind::Int,
        )
}

pub fn initial_block_attrs(points: &Matrix, labels: &[f64], params: &SmoParams) -> AttrMap {
    let mut attrs = AttrMap::new();
    attrs.insert("points".into(), matrix_to_value(points));
    attrs.insert(
        "labels".into(),
        Value::float_array(vec![labels.len()], labels.to_vec()).expect("vector shape"),
    );
    attrs.insert("c".into(), Value::Float(params.c));
    let (kernel, gamma) = match params.kernel {
        Kernel::Linear => ("linear", 0.0),
        Kernel::Rbf { gamma } => ("rbf", gamma),
    };
    attrs.insert("kernel".into(), Value::Text(kernel.into()));
    attrs.insert("gamma".into(), Value::Float(gamma));
    attrs.insert("model".into(), Value::List(vec![]));
    attrs
}

fn params_from_attrs(attrs: &AttrMap) -> Result<SmoParams, MethodError> {
    let c = attrs
        .get("c")
        .and_then(|v| v.as_float())
        .ok_or_else(|| MethodError::failed("missing penalty attribute"))?;
    let kernel = match attrs.get("kernel").and_then(|v| v.as_text()) {
        Some("linear") => Kernel::Linear,
        Some("rbf") => Kernel::Rbf {
            gamma: attrs.get("gamma").and_then(|v| v.as_float()).unwrap_or(0.5),
        },
        other => {
            return Err(MethodError::failed(format!(
                "unknown kernel {other:?} (expected linear or rbf)"
            )))
        }
    };
    Ok(SmoParams {
        c,
        kernel,
        ..Default::default()
    })
}

fn block_data(attrs: &AttrMap) -> Result<(Matrix, Vec<f64>), MethodError> {
    let points = value_to_matrix(
        attrs
            .get("points")
            .ok_or_else(|| MethodError::failed("missing points"))?,
        "points",
    )?;
    let labels = attrs
        .get("labels")
        .and_then(|v| v.as_float_array())
        .ok_or_else(|| MethodError::failed("missing labels"))?
        .data()
        .to_vec();
    Ok((points, labels))
}

pub fn model_to_value(model: &SvmModel) -> Value {
    Value::List(vec![
        matrix_to_value(&model.support_vectors),
        Value::float_array(vec![model.coef.len()], model.coef.clone()).expect("vector"),
        Value::Float(model.bias),
    ])
}

pub fn model_from_value(value: &Value, params: &SmoParams) -> Result<SvmModel, MethodError> {
    let items = value
        .as_list()
        .ok_or_else(|| MethodError::failed("model attribute is not a list"))?;
    if items.len() != 3 {
        return Err(MethodError::failed("block has no trained model"));
    }
    let support_vectors = value_to_matrix(&items[0], "support vectors")?;
    let coef = items[1]
        .as_float_array()
        .ok_or_else(|| MethodError::failed("bad coefficients"))?
        .data()
        .to_vec();
    let bias = items[2]
        .as_float()
        .ok_or_else(|| MethodError::failed("bad bias"))?;
    Ok(SvmModel {
        support_vectors,
        coef,
        bias,
        kernel: params.kernel,
        c: params.c,
    })
}

pub fn block_table() -> MethodTable {
    MethodTable::new()
        .with("train_leaf", |ctx: &mut MethodCtx<'_>| {
            let params = params_from_attrs(ctx.attrs)?;
            let (points, labels) = block_data(ctx.attrs)?;
            let extra_sv = value_to_matrix(ctx.arg(0), "extra support vectors")?;
            let extra_coef = ctx
                .arg(1)
                .as_float_array()
                .ok_or_else(|| MethodError::BadArgument("extra coefficients".into()))?;
            let (train_points, train_labels) = if extra_sv.rows() > 0 {
                let mut l = labels.clone();
                l.extend(extra_coef.data().iter().map(|&c| if c >= 0.0 { 1.0 } else { -1.0 }));
                (Matrix::vstack(&[&points, &extra_sv]), l)
            } else {
                (points, labels)
            };
            let model = train_smo(&train_points, &train_labels, &params)
                .map_err(|e| MethodError::failed(e.to_string()))?;
            let count = model.sv_count() as i64;
            ctx.attrs.insert("model".into(), model_to_value(&model));
            Ok(Value::Int(count))
        })
        .with("merge_from", |ctx: &mut MethodCtx<'_>| {
            let params = params_from_attrs(ctx.attrs)?;
            let own = model_from_value(
                ctx.attrs
                    .get("model")
                    .ok_or_else(|| MethodError::failed("no model attribute"))?,
                &params,
            )?;
            let other_ref = ctx
                .arg(0)
                .as_object_ref()
                .ok_or_else(|| MethodError::BadArgument("expected an object ref".into()))?;
            // Only the other block's model travels: its SV payload.
            let other_value = ctx.fetch_attribute(other_ref, "model")?;
            let other = model_from_value(&other_value, &params)?;
            let merged =
                merge_models(&own, &other, &params).map_err(|e| MethodError::failed(e.to_string()))?;
            let count = merged.sv_count() as i64;
            ctx.attrs.insert("model".into(), model_to_value(&merged));
            Ok(Value::Int(count))
        })
        .with("count_violations", |ctx: &mut MethodCtx<'_>| {
            let params = params_from_attrs(ctx.attrs)?;
            let (points, labels) = block_data(ctx.attrs)?;
            let model = SvmModel {
                support_vectors: value_to_matrix(ctx.arg(0), "support vectors")?,
                coef: ctx
                    .arg(1)
                    .as_float_array()
                    .ok_or_else(|| MethodError::BadArgument("coefficients".into()))?
                    .data()
                    .to_vec(),
                bias: ctx
                    .arg(2)
                    .as_float()
                    .ok_or_else(|| MethodError::BadArgument("bias".into()))?,
                kernel: params.kernel,
                c: params.c,
            };
            let violations = kkt_violations(&model, &points, &labels, params.tol)
                .map_err(|e| MethodError::failed(e.to_string()))?;
            Ok(Value::Int(violations as i64))
        })
}

pub fn register_block(registry: &Registry) -> Result<(), aos_core::RegistryError> {
    registry.register_class(block_descriptor(), Some(block_table()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csvm::dataset::generate_csvm_dataset;
    use aos_core::{FloatArray, NullRuntime, ObjectId};

    fn run(attrs: &mut AttrMap, method: &str, args: Vec<Value>) -> Result<Value, MethodError> {
        let table = block_table();
        let f = table.get(method).unwrap().clone();
        let mut ctx = MethodCtx {
            object_id: ObjectId::new_random(),
            attrs,
            args: &args,
            runtime: &NullRuntime,
        };
        f(&mut ctx)
    }

    fn empty_matrix_value() -> Value {
        Value::FloatArray(FloatArray::empty())
    }

    #[test]
    fn leaf_training_matches_direct_smo() {
        let (points, labels) = generate_csvm_dataset(96, 2, 1);
        let params = SmoParams::default();
        let mut attrs = initial_block_attrs(&points, &labels, &params);
        let count = run(
            &mut attrs,
            "train_leaf",
            vec![empty_matrix_value(), empty_matrix_value()],
        )
        .unwrap();

        let direct = train_smo(&points, &labels, &params).unwrap();
        assert_eq!(count, Value::Int(direct.sv_count() as i64));
        let stored = model_from_value(attrs.get("model").unwrap(), &params).unwrap();
        assert_eq!(stored.coef, direct.coef);
        assert_eq!(stored.bias, direct.bias);
    }

    #[test]
    fn violations_of_the_own_model_are_zero() {
        let (points, labels) = generate_csvm_dataset(64, 2, 2);
        let params = SmoParams::default();
        let mut attrs = initial_block_attrs(&points, &labels, &params);
        run(
            &mut attrs,
            "train_leaf",
            vec![empty_matrix_value(), empty_matrix_value()],
        )
        .unwrap();
        let model = model_from_value(attrs.get("model").unwrap(), &params).unwrap();
        let violations = run(
            &mut attrs,
            "count_violations",
            vec![
                matrix_to_value(&model.support_vectors),
                Value::float_array(vec![model.coef.len()], model.coef.clone()).unwrap(),
                Value::Float(model.bias),
            ],
        )
        .unwrap();
        assert_eq!(violations, Value::Int(0));
    }
}
