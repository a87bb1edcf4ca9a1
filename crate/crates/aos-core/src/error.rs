use thiserror::Error;

/// Construction errors for values.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValueError {
    #[error("float array shape {shape:?} has product {product} but {len} elements were given")]
    ShapeMismatch {
        shape: Vec<usize>,
        product: usize,
        len: usize,
    },
    #[error("float array rank {0} exceeds the wire limit of 255")]
    RankTooLarge(usize),
    #[error("dimension {0} exceeds the u32 wire limit")]
    DimTooLarge(usize),
}

/// Decoding failure, always carrying the byte offset where it happened.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("decode error at byte {offset}: {reason}")]
pub struct DecodeError {
    pub offset: usize,
    pub reason: String,
}

impl DecodeError {
    pub fn new(offset: usize, reason: impl Into<String>) -> Self {
        DecodeError {
            offset,
            reason: reason.into(),
        }
    }
}

/// Class registration and lookup errors.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("class `{0}` is not registered")]
    UnknownClass(String),
    #[error("class `{0}` is already registered with a conflicting descriptor")]
    SchemaConflict(String),
    #[error("class `{0}` has no executable implementation in this process")]
    NotExecutableHere(String),
    #[error("class `{class}` has no method `{method}`")]
    MethodNotFound { class: String, method: String },
    #[error("method `{method}` of `{class}` takes {expected} arguments, got {actual}")]
    ArityMismatch {
        class: String,
        method: String,
        expected: usize,
        actual: usize,
    },
    #[error("implementation for `{class}` is missing method `{method}`")]
    IncompleteImplementation { class: String, method: String },
}

/// Attribute schema violations (store, get_attribute, set_attribute).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaViolation {
    #[error("attribute `{0}` is not declared by the class")]
    Undeclared(String),
    #[error("attribute `{0}` is missing")]
    Missing(String),
    #[error("attribute `{name}` expects kind {expected}, got {actual}")]
    KindMismatch {
        name: String,
        expected: String,
        actual: String,
    },
}

/// Failure inside a cross-object runtime call made by a method body.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("object {0} not found")]
    ObjectNotFound(String),
    #[error("attribute `{0}` not available: {1}")]
    Attribute(String, String),
    #[error("runtime unavailable: {0}")]
    Unavailable(String),
}

/// Failure raised by a user method body.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MethodError {
    #[error("bad argument: {0}")]
    BadArgument(String),
    #[error("{0}")]
    Failed(String),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

impl MethodError {
    pub fn failed(msg: impl Into<String>) -> Self {
        MethodError::Failed(msg.into())
    }
}
