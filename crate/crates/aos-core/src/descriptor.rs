//! Class and method schemas. A descriptor is the part of a class that
//! every process may hold; the method table (implementation) is only
//! present where execution is allowed.

use crate::codec::{self, Reader};
use crate::error::DecodeError;
use crate::value::ValueKind;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeDef {
    pub name: String,
    pub kind: ValueKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodDescriptor {
    pub name: String,
    pub params: Vec<ValueKind>,
    pub returns: ValueKind,
}

/// Schema of a class: dotted name, declared attributes, method signatures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDescriptor {
    pub class_name: String,
    pub attributes: Vec<AttributeDef>,
    pub methods: Vec<MethodDescriptor>,
}

impl ClassDescriptor {
    pub fn new(class_name: impl Into<String>) -> Self {
        ClassDescriptor {
            class_name: class_name.into(),
            attributes: Vec::new(),
            methods: Vec::new(),
        }
    }

    pub fn attribute(mut self, name: impl Into<String>, kind: ValueKind) -> Self {
        self.attributes.push(AttributeDef {
            name: name.into(),
            kind,
        });
        self
    }

    pub fn method(
        mut self,
        name: impl Into<String>,
        params: Vec<ValueKind>,
        returns: ValueKind,
    ) -> Self {
        self.methods.push(MethodDescriptor {
            name: name.into(),
            params,
            returns,
        });
        self
    }

    pub fn find_attribute(&self, name: &str) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn find_method(&self, name: &str) -> Option<&MethodDescriptor> {
        self.methods.iter().find(|m| m.name == name)
    }

    /// Attribute and method names must be unique within the class.
    pub fn validate(&self) -> Result<(), String> {
        let mut seen = std::collections::HashSet::new();
        for a in &self.attributes {
            if !seen.insert(&a.name) {
                return Err(format!("duplicate attribute `{}`", a.name));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for m in &self.methods {
            if !seen.insert(&m.name) {
                return Err(format!("duplicate method `{}`", m.name));
            }
        }
        Ok(())
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        codec::put_str(out, &self.class_name);
        codec::put_u32(out, self.attributes.len() as u32);
        for a in &self.attributes {
            codec::put_str(out, &a.name);
            codec::put_u8(out, a.kind as u8);
        }
        codec::put_u32(out, self.methods.len() as u32);
        for m in &self.methods {
            codec::put_str(out, &m.name);
            codec::put_u8(out, m.params.len() as u8);
            for &p in &m.params {
                codec::put_u8(out, p as u8);
            }
            codec::put_u8(out, m.returns as u8);
        }
    }

    pub fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        fn kind(r: &mut Reader<'_>, what: &str) -> Result<ValueKind, DecodeError> {
            let at = r.position();
            let tag = r.u8(what)?;
            ValueKind::from_tag(tag)
                .ok_or_else(|| DecodeError::new(at, format!("{what}: unknown kind tag {tag}")))
        }

        let class_name = r.str("class name")?;
        let n_attrs = r.u32("attribute count")? as usize;
        let mut attributes = Vec::with_capacity(n_attrs.min(1024));
        for _ in 0..n_attrs {
            let name = r.str("attribute name")?;
            attributes.push(AttributeDef {
                name,
                kind: kind(r, "attribute kind")?,
            });
        }
        let n_methods = r.u32("method count")? as usize;
        let mut methods = Vec::with_capacity(n_methods.min(1024));
        for _ in 0..n_methods {
            let name = r.str("method name")?;
            let n_params = r.u8("param count")? as usize;
            let mut params = Vec::with_capacity(n_params);
            for _ in 0..n_params {
                params.push(kind(r, "param kind")?);
            }
            methods.push(MethodDescriptor {
                name,
                params,
                returns: kind(r, "return kind")?,
            });
        }
        Ok(ClassDescriptor {
            class_name,
            attributes,
            methods,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ClassDescriptor {
        ClassDescriptor::new("workload.trainer")
            .attribute("series", ValueKind::FloatArray)
            .attribute("window", ValueKind::Int)
            .method("train", vec![ValueKind::Int, ValueKind::Float], ValueKind::List)
            .method("evaluate", vec![], ValueKind::List)
    }

    #[test]
    fn encode_decode_identity() {
        let d = sample();
        let mut out = Vec::new();
        d.encode_into(&mut out);
        let mut r = Reader::new(&out);
        let back = ClassDescriptor::decode_from(&mut r).unwrap();
        r.expect_end().unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn duplicate_method_rejected() {
        let d = ClassDescriptor::new("a.b")
            .method("m", vec![], ValueKind::Null)
            .method("m", vec![ValueKind::Int], ValueKind::Null);
        assert!(d.validate().is_err());
    }
}
