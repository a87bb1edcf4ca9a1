//! Core model of the aos active object store.
//!
//! Everything that both sides of the wire must agree on lives here:
//!
//! - [`ObjectId`]: stable identity of a persistent object (identity, not
//!   location — an object keeps its id across moves and replications).
//! - [`Value`]: the closed value model used for attributes, method
//!   arguments and results. Clients never need user code to talk to a
//!   backend precisely because this grammar is closed.
//! - [`ClassDescriptor`] / [`Registry`]: schema registration, decoupled
//!   from method implementations so a process can hold the schema of a
//!   class without being able to execute it (stub mode).
//! - [`SerializedObject`]: the transferable form of an object's state.
//!
//! The byte encodings in [`value`] and [`object`] are canonical: each
//! value has exactly one valid byte form, so sizes are reproducible and
//! byte accounting in the protocol layer is meaningful.

pub mod codec;
pub mod descriptor;
pub mod error;
pub mod id;
pub mod object;
pub mod registry;
pub mod value;

pub use descriptor::{AttributeDef, ClassDescriptor, MethodDescriptor};
pub use error::{DecodeError, MethodError, RegistryError, RuntimeError, SchemaViolation, ValueError};
pub use id::ObjectId;
pub use object::{SerializedObject, SCHEMA_VERSION};
pub use registry::{AttrMap, MethodCtx, MethodFn, MethodTable, NullRuntime, ObjectRuntime, Registry};
pub use value::{deserialize_value, serialize_value, FloatArray, Value, ValueKind};
