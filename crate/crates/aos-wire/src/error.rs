use aos_core::{DecodeError, RegistryError, SchemaViolation};
use thiserror::Error;

use crate::types::BackendId;

/// Error codes carried by ERROR frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum ErrorCode {
    ProtocolMismatch = 1,
    FrameTooLarge = 2,
    UnsupportedMessage = 3,
    MalformedPayload = 4,
    SchemaConflict = 5,
    ClassNotRegistered = 6,
    ObjectNotFound = 7,
    MethodNotFound = 8,
    ArityMismatch = 9,
    SchemaViolation = 10,
    NotExecutableHere = 11,
    Redirect = 12,
    ExecutionFailed = 13,
    TransferFailed = 14,
    BackendUnavailable = 15,
    AlreadyRegistered = 16,
    InvalidRequest = 17,
    Internal = 18,
}

impl ErrorCode {
    pub fn from_u16(v: u16) -> Option<ErrorCode> {
        use ErrorCode::*;
        Some(match v {
            1 => ProtocolMismatch,
            2 => FrameTooLarge,
            3 => UnsupportedMessage,
            4 => MalformedPayload,
            5 => SchemaConflict,
            6 => ClassNotRegistered,
            7 => ObjectNotFound,
            8 => MethodNotFound,
            9 => ArityMismatch,
            10 => SchemaViolation,
            11 => NotExecutableHere,
            12 => Redirect,
            13 => ExecutionFailed,
            14 => TransferFailed,
            15 => BackendUnavailable,
            16 => AlreadyRegistered,
            17 => InvalidRequest,
            18 => Internal,
            _ => return None,
        })
    }
}

/// A decoded remote failure: code, message and the backend it came from.
/// `redirect_to` is only meaningful for [`ErrorCode::Redirect`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("remote error from backend {origin_backend}: {code:?}: {message}")]
pub struct RemoteError {
    pub code: ErrorCode,
    pub origin_backend: BackendId,
    pub redirect_to: Option<BackendId>,
    pub message: String,
}

impl RemoteError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        RemoteError {
            code,
            origin_backend: BackendId(0),
            redirect_to: None,
            message: message.into(),
        }
    }

    pub fn from_backend(mut self, id: BackendId) -> Self {
        self.origin_backend = id;
        self
    }

    pub fn redirect(target: BackendId, message: impl Into<String>) -> Self {
        RemoteError {
            code: ErrorCode::Redirect,
            origin_backend: BackendId(0),
            redirect_to: Some(target),
            message: message.into(),
        }
    }
}

impl From<RegistryError> for RemoteError {
    fn from(e: RegistryError) -> Self {
        let code = match &e {
            RegistryError::UnknownClass(_) => ErrorCode::ClassNotRegistered,
            RegistryError::SchemaConflict(_) => ErrorCode::SchemaConflict,
            RegistryError::NotExecutableHere(_) => ErrorCode::NotExecutableHere,
            RegistryError::MethodNotFound { .. } => ErrorCode::MethodNotFound,
            RegistryError::ArityMismatch { .. } => ErrorCode::ArityMismatch,
            RegistryError::IncompleteImplementation { .. } => ErrorCode::SchemaConflict,
        };
        RemoteError::new(code, e.to_string())
    }
}

impl From<SchemaViolation> for RemoteError {
    fn from(e: SchemaViolation) -> Self {
        RemoteError::new(ErrorCode::SchemaViolation, e.to_string())
    }
}

/// Transport and protocol failures.
#[derive(Debug, Error)]
pub enum WireError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("protocol mismatch: bad magic")]
    ProtocolMismatch,
    #[error("frame too large: {0} bytes")]
    FrameTooLarge(u64),
    #[error("unsupported message type {0:#x}")]
    UnsupportedMessage(u8),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("connection closed while a request was in flight")]
    ConnectionClosed,
    #[error("timed out waiting for a response")]
    ResponseTimeout,
    #[error(transparent)]
    Remote(#[from] RemoteError),
}

impl WireError {
    /// Error code used when reporting this failure to a peer.
    pub fn code(&self) -> ErrorCode {
        match self {
            WireError::ProtocolMismatch => ErrorCode::ProtocolMismatch,
            WireError::FrameTooLarge(_) => ErrorCode::FrameTooLarge,
            WireError::UnsupportedMessage(_) => ErrorCode::UnsupportedMessage,
            WireError::Decode(_) => ErrorCode::MalformedPayload,
            WireError::Remote(e) => e.code,
            _ => ErrorCode::Internal,
        }
    }
}
