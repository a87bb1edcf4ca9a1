//! Client SDK: remote objects usable as if they were local.
//!
//! A [`StubHandle`] is the client-side shadow of a persistent object. It
//! holds identity, schema and a last-known location — never attribute
//! data — and works in a process that registers zero method
//! implementations. Descriptors resolve from the local schema registry
//! or, failing that, by name from the metadata service, so using a class
//! needs no import of its implementation.
//!
//! Every invocation is synchronous and follows at most one redirect;
//! failures stay visible, nothing retries silently.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use aos_core::{
    AttrMap, ClassDescriptor, ObjectId, Registry, RegistryError, SchemaViolation,
    SerializedObject, Value,
};
use aos_wire::{
    BackendId, BackendRecord, Connection, ConnectionConfig, ErrorCode, ExchangeStats,
    LatencyInjection, Liveness, LookupAnswer, LookupQuery, RemoteError, Request, Response,
    StoreBody, WireError,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Schema(#[from] SchemaViolation),
    #[error("backend `{hint}` unavailable: {reason}")]
    BackendUnavailable { hint: String, reason: String },
    #[error("bad call: {0}")]
    BadCall(String),
}

impl ClientError {
    pub fn remote(&self) -> Option<&RemoteError> {
        match self {
            ClientError::Wire(WireError::Remote(e)) => Some(e),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SessionConfig {
    pub metadata_addr: String,
    /// Injected latency on data (backend) connections.
    pub latency: Option<LatencyInjection>,
    pub response_timeout: Option<Duration>,
}

impl SessionConfig {
    pub fn new(metadata_addr: impl Into<String>) -> Self {
        SessionConfig {
            metadata_addr: metadata_addr.into(),
            latency: None,
            response_timeout: None,
        }
    }
}

/// Timing split of one remote invocation: the server-measured method
/// time versus everything else (serialization, transfer, waiting).
/// `total = server + overhead` by construction.
#[derive(Debug, Clone, Copy, Default)]
pub struct CallTiming {
    pub total_seconds: f64,
    pub server_seconds: f64,
    pub overhead_seconds: f64,
    pub bytes_sent: u64,
    pub bytes_received: u64,
}

impl CallTiming {
    fn finish(started: Instant, server_seconds: f64, stats: &[ExchangeStats]) -> CallTiming {
        let total_seconds = started.elapsed().as_secs_f64();
        CallTiming {
            total_seconds,
            server_seconds,
            overhead_seconds: total_seconds - server_seconds,
            bytes_sent: stats.iter().map(|s| s.bytes_sent).sum(),
            bytes_received: stats.iter().map(|s| s.bytes_received).sum(),
        }
    }
}

/// Aggregate traffic of a session, split into the data plane (backend
/// connections) and the metadata control plane.
#[derive(Debug, Clone, Copy, Default)]
pub struct SessionStats {
    pub data_bytes_sent: u64,
    pub data_bytes_received: u64,
    pub data_messages_sent: u64,
    pub data_messages_received: u64,
    pub metadata_bytes_sent: u64,
    pub metadata_bytes_received: u64,
    /// FloatArray payload bytes materialized in this process by
    /// attribute reads. Stays zero for a stub-only workload driver.
    pub attribute_float_bytes_fetched: u64,
}

/// Where to place an object. Deterministic: a dead or unknown hint is an
/// error, never a silent fallback.
#[derive(Debug, Clone)]
pub enum BackendHint {
    Label(String),
    Id(BackendId),
}

impl From<&str> for BackendHint {
    fn from(label: &str) -> Self {
        BackendHint::Label(label.to_string())
    }
}

impl From<BackendId> for BackendHint {
    fn from(id: BackendId) -> Self {
        BackendHint::Id(id)
    }
}

impl std::fmt::Display for BackendHint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendHint::Label(l) => write!(f, "{l}"),
            BackendHint::Id(id) => write!(f, "backend {id}"),
        }
    }
}

/// Client-side shadow of a remote object: identity, schema, location.
/// No attribute data lives here; every read and write goes remote.
#[derive(Debug)]
pub struct StubHandle {
    pub object_id: ObjectId,
    pub class_name: String,
    pub descriptor: Arc<ClassDescriptor>,
    primary: AtomicU32,
}

impl StubHandle {
    pub fn primary(&self) -> BackendId {
        BackendId(self.primary.load(Ordering::Relaxed))
    }

    fn set_primary(&self, id: BackendId) {
        self.primary.store(id.0, Ordering::Relaxed);
    }
}

struct SessionInner {
    metadata: Connection,
    schema: Registry,
    descriptors: Mutex<HashMap<String, Arc<ClassDescriptor>>>,
    backends: Mutex<HashMap<BackendId, Arc<Connection>>>,
    directory: Mutex<HashMap<BackendId, BackendRecord>>,
    attr_float_bytes: AtomicU64,
    config: SessionConfig,
}

#[derive(Clone)]
pub struct Session {
    inner: Arc<SessionInner>,
}

impl Session {
    pub fn connect(config: SessionConfig) -> Result<Session, ClientError> {
        let metadata = Connection::connect(
            &config.metadata_addr,
            ConnectionConfig {
                response_timeout: config.response_timeout,
                ..Default::default()
            },
        )?;
        Ok(Session {
            inner: Arc::new(SessionInner {
                metadata,
                schema: Registry::new(),
                descriptors: Mutex::new(HashMap::new()),
                backends: Mutex::new(HashMap::new()),
                directory: Mutex::new(HashMap::new()),
                attr_float_bytes: AtomicU64::new(0),
                config,
            }),
        })
    }

    /// Register a descriptor locally (schema only — sessions never hold
    /// implementations).
    pub fn register_descriptor(&self, descriptor: ClassDescriptor) -> Result<(), ClientError> {
        self.inner.schema.register_class(descriptor, None)?;
        Ok(())
    }

    /// Number of classes this process could execute. Always zero for a
    /// session registry; the offload harness asserts on it at startup.
    pub fn implementation_count(&self) -> usize {
        self.inner.schema.implementation_count()
    }

    pub fn stats(&self) -> SessionStats {
        let mut out = SessionStats {
            attribute_float_bytes_fetched: self.inner.attr_float_bytes.load(Ordering::Relaxed),
            ..Default::default()
        };
        let m = self.inner.metadata.counters();
        out.metadata_bytes_sent = m.bytes_sent;
        out.metadata_bytes_received = m.bytes_received;
        for conn in self.inner.backends.lock().unwrap().values() {
            let c = conn.counters();
            out.data_bytes_sent += c.bytes_sent;
            out.data_bytes_received += c.bytes_received;
            out.data_messages_sent += c.messages_sent;
            out.data_messages_received += c.messages_received;
        }
        out
    }

    /// Resolve a descriptor: local registry first, then fetch-by-name
    /// from the metadata service (the stub import-avoidance mechanism).
    pub fn descriptor(&self, class_name: &str) -> Result<Arc<ClassDescriptor>, ClientError> {
        if let Some(d) = self.inner.descriptors.lock().unwrap().get(class_name) {
            return Ok(Arc::clone(d));
        }
        let descriptor = if let Ok(d) = self.inner.schema.descriptor(class_name) {
            d
        } else {
            let (resp, _) = self
                .inner
                .metadata
                .request_ok(&Request::Lookup(LookupQuery::Class(class_name.into())))
                .map_err(|e| match e {
                    WireError::Remote(r) if r.code == ErrorCode::ClassNotRegistered => {
                        ClientError::Registry(RegistryError::UnknownClass(class_name.into()))
                    }
                    other => ClientError::Wire(other),
                })?;
            match resp {
                Response::Lookup(LookupAnswer::Class(d)) => d,
                other => {
                    return Err(ClientError::BadCall(format!(
                        "unexpected lookup answer {other:?}"
                    )))
                }
            }
        };
        let descriptor = Arc::new(descriptor);
        self.inner
            .descriptors
            .lock()
            .unwrap()
            .insert(class_name.to_string(), Arc::clone(&descriptor));
        Ok(descriptor)
    }

    /// `StubDataClayObject["name"]` analog: a constructor bound to a
    /// class that needs no implementation in this process.
    pub fn stub_class(&self, class_name: &str) -> Result<StubClass, ClientError> {
        Ok(StubClass {
            session: self.clone(),
            descriptor: self.descriptor(class_name)?,
        })
    }

    pub fn backends(&self) -> Result<Vec<BackendRecord>, ClientError> {
        let (resp, _) = self
            .inner
            .metadata
            .request_ok(&Request::Lookup(LookupQuery::Backends))?;
        match resp {
            Response::Lookup(LookupAnswer::Backends(list)) => {
                let mut dir = self.inner.directory.lock().unwrap();
                for b in &list {
                    dir.insert(b.id, b.clone());
                }
                Ok(list)
            }
            other => Err(ClientError::BadCall(format!(
                "unexpected lookup answer {other:?}"
            ))),
        }
    }

    fn resolve_hint(&self, hint: &BackendHint) -> Result<BackendRecord, ClientError> {
        let list = self.backends()?;
        let found = list.into_iter().find(|b| match hint {
            BackendHint::Label(l) => &b.label == l,
            BackendHint::Id(id) => b.id == *id,
        });
        match found {
            Some(record) if record.status == Liveness::Alive => Ok(record),
            Some(record) => Err(ClientError::BackendUnavailable {
                hint: hint.to_string(),
                reason: format!("backend {} is suspect", record.id),
            }),
            None => Err(ClientError::BackendUnavailable {
                hint: hint.to_string(),
                reason: "no such backend registered".into(),
            }),
        }
    }

    fn data_connection(&self, id: BackendId) -> Result<Arc<Connection>, ClientError> {
        if let Some(conn) = self.inner.backends.lock().unwrap().get(&id) {
            return Ok(Arc::clone(conn));
        }
        let address = {
            let dir = self.inner.directory.lock().unwrap();
            dir.get(&id).map(|b| b.address.clone())
        };
        let address = match address {
            Some(a) => a,
            None => {
                self.backends()?;
                self.inner
                    .directory
                    .lock()
                    .unwrap()
                    .get(&id)
                    .map(|b| b.address.clone())
                    .ok_or_else(|| ClientError::BackendUnavailable {
                        hint: format!("backend {id}"),
                        reason: "not in the backend directory".into(),
                    })?
            }
        };
        let conn = Connection::connect(
            &address,
            ConnectionConfig {
                latency: self.inner.config.latency,
                response_timeout: self.inner.config.response_timeout,
                connect_timeout: Some(Duration::from_secs(2)),
            },
        )
        .map_err(|e| ClientError::BackendUnavailable {
            hint: format!("backend {id}"),
            reason: e.to_string(),
        })?;
        let conn = Arc::new(conn);
        self.inner.backends.lock().unwrap().insert(id, Arc::clone(&conn));
        Ok(conn)
    }

    /// Create a persistent object on exactly the hinted backend.
    pub fn make_persistent(
        &self,
        class_name: &str,
        attributes: AttrMap,
        hint: impl Into<BackendHint>,
    ) -> Result<StubHandle, ClientError> {
        let hint = hint.into();
        let descriptor = self.descriptor(class_name)?;
        aos_core::object::check_attributes(&attributes, &descriptor)?;
        let record = self.resolve_hint(&hint)?;
        let conn = self.data_connection(record.id)?;
        let object = SerializedObject::new(class_name, ObjectId::new_random(), attributes);
        let (resp, _) = conn.request_ok(&Request::Store(StoreBody::Object(object)))?;
        let id = match resp {
            Response::Store(id) => id,
            other => return Err(ClientError::BadCall(format!("unexpected {other:?}"))),
        };
        Ok(StubHandle {
            object_id: id,
            class_name: class_name.to_string(),
            descriptor,
            primary: AtomicU32::new(record.id.0),
        })
    }

    /// Synchronous remote invocation. Blocks until the result arrives and
    /// follows at most one redirect; bytes of both hops are accounted.
    pub fn invoke(
        &self,
        handle: &StubHandle,
        method: &str,
        args: Vec<Value>,
    ) -> Result<(Value, CallTiming), ClientError> {
        // Reject bad calls client-side using the descriptor alone.
        let m = handle.descriptor.find_method(method).ok_or_else(|| {
            RegistryError::MethodNotFound {
                class: handle.class_name.clone(),
                method: method.to_string(),
            }
        })?;
        if m.params.len() != args.len() {
            return Err(RegistryError::ArityMismatch {
                class: handle.class_name.clone(),
                method: method.to_string(),
                expected: m.params.len(),
                actual: args.len(),
            }
            .into());
        }
        for (i, (param, arg)) in m.params.iter().zip(&args).enumerate() {
            if *param != arg.kind() {
                return Err(ClientError::BadCall(format!(
                    "argument {i} of `{method}` expects {param}, got {}",
                    arg.kind()
                )));
            }
        }

        let request = Request::Call {
            object_id: handle.object_id,
            method: method.to_string(),
            args,
        };
        let started = Instant::now();
        let mut hops = Vec::with_capacity(2);
        let conn = self.data_connection(handle.primary())?;
        let (resp, stats) = conn.request(&request)?;
        hops.push(stats);
        let resp = match resp {
            Response::Error(e) if e.code == ErrorCode::Redirect => {
                let target = e.redirect_to.ok_or_else(|| {
                    ClientError::Wire(WireError::Remote(e.clone()))
                })?;
                handle.set_primary(target);
                let conn = self.data_connection(target)?;
                let (resp, stats) = conn.request(&request)?;
                hops.push(stats);
                resp
            }
            other => other,
        };
        match resp.into_result().map_err(WireError::Remote)? {
            Response::Call {
                result,
                server_seconds,
            } => Ok((result, CallTiming::finish(started, server_seconds, &hops))),
            other => Err(ClientError::BadCall(format!("unexpected {other:?}"))),
        }
    }

    pub fn get_attribute(
        &self,
        handle: &StubHandle,
        name: &str,
    ) -> Result<(Value, CallTiming), ClientError> {
        let started = Instant::now();
        let conn = self.data_connection(handle.primary())?;
        let (resp, stats) = conn.request_ok(&Request::GetAttr {
            object_id: handle.object_id,
            name: name.to_string(),
        })?;
        match resp {
            Response::GetAttr(v) => {
                self.inner
                    .attr_float_bytes
                    .fetch_add(float_payload_bytes(&v), Ordering::Relaxed);
                Ok((v, CallTiming::finish(started, 0.0, &[stats])))
            }
            other => Err(ClientError::BadCall(format!("unexpected {other:?}"))),
        }
    }

    pub fn set_attribute(
        &self,
        handle: &StubHandle,
        name: &str,
        value: Value,
    ) -> Result<CallTiming, ClientError> {
        let started = Instant::now();
        let conn = self.data_connection(handle.primary())?;
        let (_, stats) = conn.request_ok(&Request::SetAttr {
            object_id: handle.object_id,
            name: name.to_string(),
            value,
        })?;
        Ok(CallTiming::finish(started, 0.0, &[stats]))
    }

    /// Explicit move of the object to another backend.
    pub fn move_object(
        &self,
        handle: &StubHandle,
        target: impl Into<BackendHint>,
    ) -> Result<CallTiming, ClientError> {
        let record = self.resolve_hint(&target.into())?;
        let started = Instant::now();
        let conn = self.data_connection(handle.primary())?;
        let (_, stats) = conn.request_ok(&Request::Move {
            object_id: handle.object_id,
            target: record.id,
        })?;
        handle.set_primary(record.id);
        Ok(CallTiming::finish(started, 0.0, &[stats]))
    }

    pub fn replicate_object(
        &self,
        handle: &StubHandle,
        target: impl Into<BackendHint>,
    ) -> Result<CallTiming, ClientError> {
        let record = self.resolve_hint(&target.into())?;
        let started = Instant::now();
        let conn = self.data_connection(handle.primary())?;
        let (_, stats) = conn.request_ok(&Request::Replicate {
            object_id: handle.object_id,
            target: record.id,
        })?;
        Ok(CallTiming::finish(started, 0.0, &[stats]))
    }

    /// METRICS of a backend, as the raw metrics value.
    pub fn backend_metrics(&self, id: BackendId) -> Result<Value, ClientError> {
        let conn = self.data_connection(id)?;
        let (resp, _) = conn.request_ok(&Request::Metrics)?;
        match resp {
            Response::Metrics(v) => Ok(v),
            other => Err(ClientError::BadCall(format!("unexpected {other:?}"))),
        }
    }

    /// Object location straight from the metadata service.
    pub fn lookup(&self, id: ObjectId) -> Result<aos_wire::ObjectLocationRecord, ClientError> {
        let (resp, _) = self
            .inner
            .metadata
            .request_ok(&Request::Lookup(LookupQuery::Object(id)))?;
        match resp {
            Response::Lookup(LookupAnswer::Object(loc)) => Ok(loc),
            other => Err(ClientError::BadCall(format!("unexpected {other:?}"))),
        }
    }
}

/// Constructor factory bound to a class, Listing-2 style.
pub struct StubClass {
    session: Session,
    descriptor: Arc<ClassDescriptor>,
}

impl StubClass {
    pub fn class_name(&self) -> &str {
        &self.descriptor.class_name
    }

    pub fn descriptor(&self) -> &ClassDescriptor {
        &self.descriptor
    }

    pub fn create(
        &self,
        attributes: AttrMap,
        hint: impl Into<BackendHint>,
    ) -> Result<StubHandle, ClientError> {
        self.session
            .make_persistent(&self.descriptor.class_name, attributes, hint)
    }
}

/// FloatArray payload bytes inside a value (recursively through lists).
fn float_payload_bytes(v: &Value) -> u64 {
    match v {
        Value::FloatArray(a) => 8 * a.len() as u64,
        Value::List(items) => items.iter().map(float_payload_bytes).sum(),
        _ => 0,
    }
}

// Re-exported so callers can name hint/latency types without touching
// aos-wire directly.
pub use aos_wire::LatencyInjection as Latency;
