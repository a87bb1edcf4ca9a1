//! The closed value model and its canonical byte encoding.
//!
//! Encoding (big-endian throughout): one tag byte, then
//!
//! | tag | kind       | body                                  |
//! |-----|------------|---------------------------------------|
//! | 0   | Null       | —                                     |
//! | 1   | Bool       | 1 byte, 0 or 1                        |
//! | 2   | Int        | 8 bytes                               |
//! | 3   | Float      | 8 bytes (IEEE-754 bit pattern)        |
//! | 4   | Text       | u32 length + UTF-8 payload            |
//! | 5   | Bytes      | u32 length + payload                  |
//! | 6   | FloatArray | u8 rank + rank×u32 dims + 8·N bytes   |
//! | 7   | ValueList  | u32 count + encoded items             |
//! | 8   | ObjectRef  | 16 bytes                              |
//!
//! There is exactly one valid byte form per value, so encoded sizes are
//! reproducible. Floats round-trip bit-exactly (including NaN payloads
//! and signed zero); equality on values is bitwise for float payloads
//! for the same reason.

use crate::codec::{self, Reader};
use crate::error::{DecodeError, ValueError};
use crate::id::ObjectId;

/// Kind tags, also the wire tag bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum ValueKind {
    Null = 0,
    Bool = 1,
    Int = 2,
    Float = 3,
    Text = 4,
    Bytes = 5,
    FloatArray = 6,
    List = 7,
    ObjectRef = 8,
}

impl ValueKind {
    pub fn from_tag(tag: u8) -> Option<ValueKind> {
        match tag {
            0 => Some(ValueKind::Null),
            1 => Some(ValueKind::Bool),
            2 => Some(ValueKind::Int),
            3 => Some(ValueKind::Float),
            4 => Some(ValueKind::Text),
            5 => Some(ValueKind::Bytes),
            6 => Some(ValueKind::FloatArray),
            7 => Some(ValueKind::List),
            8 => Some(ValueKind::ObjectRef),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ValueKind::Null => "Null",
            ValueKind::Bool => "Bool",
            ValueKind::Int => "Int",
            ValueKind::Float => "Float",
            ValueKind::Text => "Text",
            ValueKind::Bytes => "Bytes",
            ValueKind::FloatArray => "FloatArray",
            ValueKind::List => "ValueList",
            ValueKind::ObjectRef => "ObjectRef",
        }
    }
}

impl std::fmt::Display for ValueKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Flat 64-bit float array with an explicit shape. The shape product
/// always equals the element count; constructors enforce it.
#[derive(Debug, Clone)]
pub struct FloatArray {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl FloatArray {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, ValueError> {
        let product: usize = shape.iter().product();
        if product != data.len() {
            return Err(ValueError::ShapeMismatch {
                product,
                len: data.len(),
                shape,
            });
        }
        if shape.len() > u8::MAX as usize {
            return Err(ValueError::RankTooLarge(shape.len()));
        }
        if let Some(&d) = shape.iter().find(|&&d| d > u32::MAX as usize) {
            return Err(ValueError::DimTooLarge(d));
        }
        Ok(FloatArray { shape, data })
    }

    /// 1-D array over the given data.
    pub fn vector(data: Vec<f64>) -> Self {
        let shape = vec![data.len()];
        FloatArray { shape, data }
    }

    pub fn empty() -> Self {
        FloatArray {
            shape: vec![0],
            data: Vec::new(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn into_parts(self) -> (Vec<usize>, Vec<f64>) {
        (self.shape, self.data)
    }
}

impl PartialEq for FloatArray {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape
            && self.data.len() == other.data.len()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl Eq for FloatArray {}

/// A value of the closed grammar.
#[derive(Debug, Clone)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
    Bytes(Vec<u8>),
    FloatArray(FloatArray),
    List(Vec<Value>),
    ObjectRef(ObjectId),
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        use Value::*;
        match (self, other) {
            (Null, Null) => true,
            (Bool(a), Bool(b)) => a == b,
            (Int(a), Int(b)) => a == b,
            // Bitwise: NaN payloads and -0.0 are distinct, round-trippable values.
            (Float(a), Float(b)) => a.to_bits() == b.to_bits(),
            (Text(a), Text(b)) => a == b,
            (Bytes(a), Bytes(b)) => a == b,
            (FloatArray(a), FloatArray(b)) => a == b,
            (List(a), List(b)) => a == b,
            (ObjectRef(a), ObjectRef(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Value {
    pub fn kind(&self) -> ValueKind {
        match self {
            Value::Null => ValueKind::Null,
            Value::Bool(_) => ValueKind::Bool,
            Value::Int(_) => ValueKind::Int,
            Value::Float(_) => ValueKind::Float,
            Value::Text(_) => ValueKind::Text,
            Value::Bytes(_) => ValueKind::Bytes,
            Value::FloatArray(_) => ValueKind::FloatArray,
            Value::List(_) => ValueKind::List,
            Value::ObjectRef(_) => ValueKind::ObjectRef,
        }
    }

    pub fn float_array(shape: Vec<usize>, data: Vec<f64>) -> Result<Value, ValueError> {
        Ok(Value::FloatArray(FloatArray::new(shape, data)?))
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_float(&self) -> Option<f64> {
        match self {
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_float_array(&self) -> Option<&FloatArray> {
        match self {
            Value::FloatArray(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::List(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_object_ref(&self) -> Option<ObjectId> {
        match self {
            Value::ObjectRef(id) => Some(*id),
            _ => None,
        }
    }

    /// Exact size of the canonical encoding, without materializing it.
    pub fn encoded_len(&self) -> usize {
        1 + match self {
            Value::Null => 0,
            Value::Bool(_) => 1,
            Value::Int(_) | Value::Float(_) => 8,
            Value::Text(s) => 4 + s.len(),
            Value::Bytes(b) => 4 + b.len(),
            Value::FloatArray(a) => 1 + 4 * a.shape.len() + 8 * a.data.len(),
            Value::List(items) => 4 + items.iter().map(|v| v.encoded_len()).sum::<usize>(),
            Value::ObjectRef(_) => 16,
        }
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        codec::put_u8(out, self.kind() as u8);
        match self {
            Value::Null => {}
            Value::Bool(b) => codec::put_u8(out, *b as u8),
            Value::Int(i) => codec::put_i64(out, *i),
            Value::Float(f) => codec::put_f64(out, *f),
            Value::Text(s) => codec::put_str(out, s),
            Value::Bytes(b) => codec::put_bytes(out, b),
            Value::FloatArray(a) => {
                codec::put_u8(out, a.shape.len() as u8);
                for &d in &a.shape {
                    codec::put_u32(out, d as u32);
                }
                for &x in &a.data {
                    codec::put_f64(out, x);
                }
            }
            Value::List(items) => {
                codec::put_u32(out, items.len() as u32);
                for item in items {
                    item.encode_into(out);
                }
            }
            Value::ObjectRef(id) => out.extend_from_slice(id.as_bytes()),
        }
    }

    pub fn decode_from(r: &mut Reader<'_>) -> Result<Value, DecodeError> {
        let at = r.position();
        let tag = r.u8("value tag")?;
        let kind = ValueKind::from_tag(tag)
            .ok_or_else(|| DecodeError::new(at, format!("unknown value tag {tag}")))?;
        match kind {
            ValueKind::Null => Ok(Value::Null),
            ValueKind::Bool => {
                let at = r.position();
                match r.u8("bool")? {
                    0 => Ok(Value::Bool(false)),
                    1 => Ok(Value::Bool(true)),
                    b => Err(DecodeError::new(at, format!("non-canonical bool byte {b}"))),
                }
            }
            ValueKind::Int => Ok(Value::Int(r.i64("int")?)),
            ValueKind::Float => Ok(Value::Float(r.f64("float")?)),
            ValueKind::Text => Ok(Value::Text(r.str("text")?)),
            ValueKind::Bytes => Ok(Value::Bytes(r.byte_block("bytes")?)),
            ValueKind::FloatArray => {
                let rank = r.u8("float array rank")? as usize;
                let mut shape = Vec::with_capacity(rank);
                for _ in 0..rank {
                    shape.push(r.u32("float array dim")? as usize);
                }
                let count: usize = shape.iter().product();
                let mut data = Vec::with_capacity(count);
                for _ in 0..count {
                    data.push(r.f64("float array element")?);
                }
                Ok(Value::FloatArray(FloatArray { shape, data }))
            }
            ValueKind::List => {
                let count = r.u32("list count")? as usize;
                let mut items = Vec::with_capacity(count.min(4096));
                for _ in 0..count {
                    items.push(Value::decode_from(r)?);
                }
                Ok(Value::List(items))
            }
            ValueKind::ObjectRef => {
                let raw = r.raw(16, "object ref")?;
                Ok(Value::ObjectRef(ObjectId::from_bytes(raw.try_into().unwrap())))
            }
        }
    }
}

/// Canonical encoding of a value.
pub fn serialize_value(v: &Value) -> Vec<u8> {
    let mut out = Vec::with_capacity(v.encoded_len());
    v.encode_into(&mut out);
    out
}

/// Inverse of [`serialize_value`]; rejects trailing bytes.
pub fn deserialize_value(bytes: &[u8]) -> Result<Value, DecodeError> {
    let mut r = Reader::new(bytes);
    let v = Value::decode_from(&mut r)?;
    r.expect_end()?;
    Ok(v)
}
