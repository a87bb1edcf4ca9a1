//! The transferable form of an object's state: class name, identity,
//! schema version and the attribute map. Attributes are encoded in
//! ascending name order so the byte form is canonical.

use std::collections::BTreeMap;

use crate::codec::{self, Reader};
use crate::descriptor::ClassDescriptor;
use crate::error::{DecodeError, SchemaViolation};
use crate::id::ObjectId;
use crate::value::Value;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SerializedObject {
    pub class_name: String,
    pub object_id: ObjectId,
    pub schema_version: u32,
    pub attributes: BTreeMap<String, Value>,
}

impl SerializedObject {
    pub fn new(
        class_name: impl Into<String>,
        object_id: ObjectId,
        attributes: BTreeMap<String, Value>,
    ) -> Self {
        SerializedObject {
            class_name: class_name.into(),
            object_id,
            schema_version: SCHEMA_VERSION,
            attributes,
        }
    }

    /// Attribute names must match the descriptor exactly (no extras, no
    /// omissions) and each value must have the declared kind.
    pub fn check_schema(&self, descriptor: &ClassDescriptor) -> Result<(), SchemaViolation> {
        check_attributes(&self.attributes, descriptor)
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        codec::put_str(out, &self.class_name);
        out.extend_from_slice(self.object_id.as_bytes());
        codec::put_u32(out, self.schema_version);
        codec::put_u32(out, self.attributes.len() as u32);
        for (name, value) in &self.attributes {
            codec::put_str(out, name);
            value.encode_into(out);
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_into(&mut out);
        out
    }

    pub fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let class_name = r.str("class name")?;
        let id_raw = r.raw(16, "object id")?;
        let object_id = ObjectId::from_bytes(id_raw.try_into().unwrap());
        let schema_version = r.u32("schema version")?;
        let count = r.u32("attribute count")? as usize;
        let mut attributes = BTreeMap::new();
        let mut last: Option<String> = None;
        for _ in 0..count {
            let at = r.position();
            let name = r.str("attribute name")?;
            if let Some(prev) = &last {
                if *prev >= name {
                    return Err(DecodeError::new(
                        at,
                        format!("attributes out of canonical order: `{prev}` then `{name}`"),
                    ));
                }
            }
            let value = Value::decode_from(r)?;
            last = Some(name.clone());
            attributes.insert(name, value);
        }
        Ok(SerializedObject {
            class_name,
            object_id,
            schema_version,
            attributes,
        })
    }
}

/// Shared attribute-map check used for stored objects and set_attribute.
pub fn check_attributes(
    attributes: &BTreeMap<String, Value>,
    descriptor: &ClassDescriptor,
) -> Result<(), SchemaViolation> {
    for def in &descriptor.attributes {
        match attributes.get(&def.name) {
            None => return Err(SchemaViolation::Missing(def.name.clone())),
            Some(v) if v.kind() != def.kind => {
                return Err(SchemaViolation::KindMismatch {
                    name: def.name.clone(),
                    expected: def.kind.to_string(),
                    actual: v.kind().to_string(),
                })
            }
            Some(_) => {}
        }
    }
    for name in attributes.keys() {
        if descriptor.find_attribute(name).is_none() {
            return Err(SchemaViolation::Undeclared(name.clone()));
        }
    }
    Ok(())
}
