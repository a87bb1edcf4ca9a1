//! `bench.blob`: a plain object with one large FloatArray attribute and
//! in-place mutating methods. Exists to measure the locality claim: a
//! call that rewrites megabytes of attribute data moves only its scalar
//! arguments and result over the wire.

use aos_core::{
    AttrMap, ClassDescriptor, FloatArray, MethodError, MethodTable, Registry, Value, ValueKind,
};

use crate::convert::{need_float, need_positive};

pub const BLOB_CLASS: &str = "bench.blob";

pub fn blob_descriptor() -> ClassDescriptor {
    ClassDescriptor::new(BLOB_CLASS)
        .attribute("data", ValueKind::FloatArray)
        .method("fill", vec![ValueKind::Int, ValueKind::Float], ValueKind::Int)
        .method("scale", vec![ValueKind::Float], ValueKind::Float)
        .method("checksum", vec![], ValueKind::Float)
}

pub fn initial_blob_attrs() -> AttrMap {
    let mut attrs = AttrMap::new();
    attrs.insert("data".into(), Value::FloatArray(FloatArray::empty()));
    attrs
}

pub fn blob_table() -> MethodTable {
    MethodTable::new()
        .with("fill", |ctx| {
            let n = need_positive(ctx.arg(0), "element count")?;
            let v = need_float(ctx.arg(1), "fill value")?;
            ctx.attrs
                .insert("data".into(), Value::FloatArray(FloatArray::vector(vec![v; n])));
            Ok(Value::Int(n as i64))
        })
        .with("scale", |ctx| {
            let factor = need_float(ctx.arg(0), "factor")?;
            let mut sum = 0.0;
            match ctx.attrs.get_mut("data") {
                Some(Value::FloatArray(a)) => {
                    for x in a.data_mut() {
                        *x *= factor;
                        sum += *x;
                    }
                }
                _ => return Err(MethodError::failed("blob has no data")),
            }
            Ok(Value::Float(sum))
        })
        .with("checksum", |ctx| {
            let sum = match ctx.attrs.get("data") {
                Some(Value::FloatArray(a)) => a.data().iter().sum(),
                _ => 0.0,
            };
            Ok(Value::Float(sum))
        })
}

pub fn register_blob(registry: &Registry) -> Result<(), aos_core::RegistryError> {
    registry.register_class(blob_descriptor(), Some(blob_table()))
}
