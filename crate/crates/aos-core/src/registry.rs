//! Class registry: descriptors always, implementations optionally.
//!
//! A backend registers descriptor + method table and can execute calls;
//! a client registers (or fetches) descriptors only and can never
//! execute, which is what makes stub handles implementation-free.
//! Registries are read-mostly: registration happens at startup, lookups
//! are concurrent afterwards.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use crate::descriptor::ClassDescriptor;
use crate::error::{MethodError, RegistryError, RuntimeError};
use crate::id::ObjectId;
use crate::value::Value;

pub type AttrMap = BTreeMap<String, Value>;

/// Cross-object access available to a method body while it runs.
pub trait ObjectRuntime: Sync {
    fn get_attribute(&self, id: ObjectId, name: &str) -> Result<Value, RuntimeError>;
}

/// Runtime for contexts where methods must not reach other objects.
pub struct NullRuntime;

impl ObjectRuntime for NullRuntime {
    fn get_attribute(&self, id: ObjectId, _name: &str) -> Result<Value, RuntimeError> {
        Err(RuntimeError::Unavailable(format!(
            "no object runtime in this context (wanted {id})"
        )))
    }
}

/// Execution context handed to a method body: the live attributes of the
/// object (mutations persist), the call arguments, and the runtime.
pub struct MethodCtx<'a> {
    pub object_id: ObjectId,
    pub attrs: &'a mut AttrMap,
    pub args: &'a [Value],
    pub runtime: &'a dyn ObjectRuntime,
}

impl<'a> MethodCtx<'a> {
    /// Fetch an attribute of any object. Reads on the object currently
    /// executing are served from the live attribute map instead of going
    /// through the runtime (which would self-deadlock on the slot lock).
    pub fn fetch_attribute(&self, id: ObjectId, name: &str) -> Result<Value, RuntimeError> {
        if id == self.object_id {
            self.attrs
                .get(name)
                .cloned()
                .ok_or_else(|| RuntimeError::Attribute(name.to_string(), "not present".into()))
        } else {
            self.runtime.get_attribute(id, name)
        }
    }

    pub fn arg(&self, idx: usize) -> &Value {
        &self.args[idx]
    }
}

pub type MethodFn = Arc<dyn Fn(&mut MethodCtx<'_>) -> Result<Value, MethodError> + Send + Sync>;

/// Named method bodies for one class.
#[derive(Default, Clone)]
pub struct MethodTable {
    methods: BTreeMap<String, MethodFn>,
}

impl MethodTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(
        mut self,
        name: impl Into<String>,
        f: impl Fn(&mut MethodCtx<'_>) -> Result<Value, MethodError> + Send + Sync + 'static,
    ) -> Self {
        self.methods.insert(name.into(), Arc::new(f));
        self
    }

    pub fn get(&self, name: &str) -> Option<&MethodFn> {
        self.methods.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.methods.keys().map(|s| s.as_str())
    }
}

struct ClassEntry {
    descriptor: ClassDescriptor,
    implementation: Option<MethodTable>,
}

/// Thread-safe class registry.
#[derive(Default)]
pub struct Registry {
    classes: RwLock<HashMap<String, ClassEntry>>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a class. Re-registering an identical descriptor is
    /// idempotent; a conflicting descriptor is rejected. When an
    /// implementation is given it must cover every descriptor method.
    pub fn register_class(
        &self,
        descriptor: ClassDescriptor,
        implementation: Option<MethodTable>,
    ) -> Result<(), RegistryError> {
        descriptor
            .validate()
            .map_err(|_| RegistryError::SchemaConflict(descriptor.class_name.clone()))?;
        if let Some(table) = &implementation {
            for m in &descriptor.methods {
                if table.get(&m.name).is_none() {
                    return Err(RegistryError::IncompleteImplementation {
                        class: descriptor.class_name.clone(),
                        method: m.name.clone(),
                    });
                }
            }
        }
        let mut classes = self.classes.write().unwrap();
        if let Some(existing) = classes.get_mut(&descriptor.class_name) {
            if existing.descriptor != descriptor {
                return Err(RegistryError::SchemaConflict(descriptor.class_name));
            }
            // Idempotent re-registration; an implementation may be added
            // to a descriptor-only entry but never silently dropped.
            if implementation.is_some() {
                existing.implementation = implementation;
            }
            return Ok(());
        }
        classes.insert(
            descriptor.class_name.clone(),
            ClassEntry {
                descriptor,
                implementation,
            },
        );
        Ok(())
    }

    pub fn descriptor(&self, class_name: &str) -> Result<ClassDescriptor, RegistryError> {
        let classes = self.classes.read().unwrap();
        classes
            .get(class_name)
            .map(|e| e.descriptor.clone())
            .ok_or_else(|| RegistryError::UnknownClass(class_name.to_string()))
    }

    pub fn contains(&self, class_name: &str) -> bool {
        self.classes.read().unwrap().contains_key(class_name)
    }

    pub fn has_implementation(&self, class_name: &str) -> bool {
        self.classes
            .read()
            .unwrap()
            .get(class_name)
            .is_some_and(|e| e.implementation.is_some())
    }

    /// Number of classes registered with an implementation. A stub-only
    /// process reports zero here; the offload harness asserts on it.
    pub fn implementation_count(&self) -> usize {
        self.classes
            .read()
            .unwrap()
            .values()
            .filter(|e| e.implementation.is_some())
            .count()
    }

    pub fn class_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.classes.read().unwrap().keys().cloned().collect();
        names.sort();
        names
    }

    pub fn descriptors(&self) -> Vec<ClassDescriptor> {
        let classes = self.classes.read().unwrap();
        let mut all: Vec<ClassDescriptor> =
            classes.values().map(|e| e.descriptor.clone()).collect();
        all.sort_by(|a, b| a.class_name.cmp(&b.class_name));
        all
    }

    /// Resolve a method for execution: checks the class is executable
    /// here, the method exists and the arity matches — all before any
    /// dispatch happens.
    pub fn resolve_method(
        &self,
        class_name: &str,
        method: &str,
        arity: usize,
    ) -> Result<MethodFn, RegistryError> {
        let classes = self.classes.read().unwrap();
        let entry = classes
            .get(class_name)
            .ok_or_else(|| RegistryError::UnknownClass(class_name.to_string()))?;
        let descriptor_method = entry.descriptor.find_method(method).ok_or_else(|| {
            RegistryError::MethodNotFound {
                class: class_name.to_string(),
                method: method.to_string(),
            }
        })?;
        if descriptor_method.params.len() != arity {
            return Err(RegistryError::ArityMismatch {
                class: class_name.to_string(),
                method: method.to_string(),
                expected: descriptor_method.params.len(),
                actual: arity,
            });
        }
        let table = entry
            .implementation
            .as_ref()
            .ok_or_else(|| RegistryError::NotExecutableHere(class_name.to_string()))?;
        // Registration guarantees coverage of descriptor methods.
        Ok(table.get(method).expect("validated at registration").clone())
    }
}
