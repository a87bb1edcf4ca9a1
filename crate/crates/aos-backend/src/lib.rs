//! The backend: an execution node that holds live objects in memory and
//! runs their methods next to the data.
//!
//! Misplaced calls are redirected, never proxied, so every network hop
//! stays visible to the byte accounting. Calls on one object serialize
//! (deterministic benchmarks); calls on different objects run
//! concurrently. Replicas are read-only snapshots.

pub mod metrics;
pub mod rss;
mod semaphore;

use std::collections::HashMap;
use std::net::{SocketAddr, TcpListener};
use std::sync::{Arc, Mutex, OnceLock, RwLock};
use std::time::{Duration, Instant};

use aos_core::{
    AttrMap, MethodCtx, ObjectId, ObjectRuntime, Registry, RuntimeError, SerializedObject, Value,
};
use aos_wire::{
    serve_listener, BackendId, Connection, ConnectionConfig, ErrorCode, Handler, LookupAnswer,
    LookupQuery, ObjectLocationRecord, ObjectRole, RemoteError, Request, Response, ServerHandle,
    ServerStats, StoreBody, WireError,
};
use thiserror::Error;

use metrics::{BackendMetrics, MethodTimes};
use rss::PeakTracker;
use semaphore::Semaphore;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("registration rejected: {0}")]
    Registration(RemoteError),
}

#[derive(Debug, Clone)]
pub struct BackendConfig {
    pub metadata_addr: String,
    pub label: String,
    /// CPU throttle factor f ≥ 1: every method execution is stretched by
    /// sleeping (f − 1)·t after t seconds of compute, emulating a slower
    /// device class on the same host.
    pub throttle: f64,
    /// Maximum concurrent method executions (core-equivalents).
    pub worker_slots: Option<usize>,
    /// Unregistered backends can serve traffic but are invisible to
    /// lookups; used by liveness tests.
    pub register: bool,
}

impl BackendConfig {
    pub fn new(metadata_addr: impl Into<String>, label: impl Into<String>) -> Self {
        BackendConfig {
            metadata_addr: metadata_addr.into(),
            label: label.into(),
            throttle: 1.0,
            worker_slots: None,
            register: true,
        }
    }
}

pub struct ObjectSlot {
    pub object_id: ObjectId,
    pub class_name: String,
    pub attributes: AttrMap,
    /// Append-only (method name, wall seconds) per completed call.
    pub call_stats: Vec<(String, f64)>,
    pub resident: bool,
}

struct ObjectEntry {
    class_name: String,
    role: ObjectRole,
    slot: Mutex<ObjectSlot>,
}

struct BackendInner {
    id: BackendId,
    registry: Arc<Registry>,
    objects: RwLock<HashMap<ObjectId, Arc<ObjectEntry>>>,
    method_times: MethodTimes,
    rss: PeakTracker,
    metadata: Connection,
    peers: Mutex<HashMap<BackendId, Arc<Connection>>>,
    throttle: f64,
    workers: Option<Semaphore>,
    started: Instant,
    server_stats: OnceLock<Arc<ServerStats>>,
}

impl BackendInner {
    fn entry(&self, id: ObjectId) -> Option<Arc<ObjectEntry>> {
        self.objects.read().unwrap().get(&id).cloned()
    }

    fn stamp(&self, e: RemoteError) -> RemoteError {
        e.from_backend(self.id)
    }

    /// The object is not resident here: produce a redirect if the
    /// metadata service knows a primary, otherwise object-not-found.
    fn redirect_or_not_found(&self, id: ObjectId) -> RemoteError {
        let lookup = self
            .metadata
            .request_ok(&Request::Lookup(LookupQuery::Object(id)));
        match lookup {
            Ok((Response::Lookup(LookupAnswer::Object(loc)), _)) if loc.primary_backend != self.id => {
                self.stamp(RemoteError::redirect(
                    loc.primary_backend,
                    format!("object {id} lives on backend {}", loc.primary_backend),
                ))
            }
            _ => self.stamp(RemoteError::new(
                ErrorCode::ObjectNotFound,
                format!("object {id} is not resident here"),
            )),
        }
    }

    fn peer(&self, target: BackendId) -> Result<Arc<Connection>, RemoteError> {
        if let Some(conn) = self.peers.lock().unwrap().get(&target) {
            return Ok(Arc::clone(conn));
        }
        let (resp, _) = self
            .metadata
            .request_ok(&Request::Lookup(LookupQuery::Backends))
            .map_err(|e| RemoteError::new(ErrorCode::BackendUnavailable, e.to_string()))?;
        let Response::Lookup(LookupAnswer::Backends(list)) = resp else {
            return Err(RemoteError::new(ErrorCode::Internal, "unexpected lookup answer"));
        };
        let record = list.into_iter().find(|b| b.id == target).ok_or_else(|| {
            RemoteError::new(
                ErrorCode::BackendUnavailable,
                format!("backend {target} is not registered"),
            )
        })?;
        let config = ConnectionConfig {
            connect_timeout: Some(Duration::from_millis(500)),
            ..Default::default()
        };
        let conn = Connection::connect(&record.address, config)
            .map_err(|e| RemoteError::new(ErrorCode::TransferFailed, e.to_string()))?;
        let conn = Arc::new(conn);
        self.peers.lock().unwrap().insert(target, Arc::clone(&conn));
        Ok(conn)
    }

    fn record_placement(&self, object_id: ObjectId, class_name: &str) -> Result<(), RemoteError> {
        let loc = ObjectLocationRecord {
            object_id,
            class_name: class_name.to_string(),
            primary_backend: self.id,
            replicas: Vec::new(),
        };
        self.metadata
            .request_ok(&Request::Store(StoreBody::Location(loc)))
            .map(|_| ())
            .map_err(|e| match e {
                WireError::Remote(remote) => remote,
                other => RemoteError::new(ErrorCode::Internal, other.to_string()),
            })
    }

    fn insert_object(
        &self,
        object: SerializedObject,
        role: ObjectRole,
    ) -> Result<ObjectId, RemoteError> {
        let descriptor = self
            .registry
            .descriptor(&object.class_name)
            .map_err(RemoteError::from)?;
        if !self.registry.has_implementation(&object.class_name) {
            return Err(RemoteError::new(
                ErrorCode::NotExecutableHere,
                format!("class `{}` has no implementation on this backend", object.class_name),
            ));
        }
        object.check_schema(&descriptor).map_err(RemoteError::from)?;

        let id = object.object_id;
        let mut objects = self.objects.write().unwrap();
        if let Some(existing) = objects.get(&id) {
            // Replica snapshots may be refreshed; a primary is never
            // silently replaced.
            if !(matches!(existing.role, ObjectRole::Replica) && matches!(role, ObjectRole::Replica)) {
                return Err(RemoteError::new(
                    ErrorCode::InvalidRequest,
                    format!("object {id} is already resident here"),
                ));
            }
        }
        objects.insert(
            id,
            Arc::new(ObjectEntry {
                class_name: object.class_name.clone(),
                role,
                slot: Mutex::new(ObjectSlot {
                    object_id: id,
                    class_name: object.class_name,
                    attributes: object.attributes,
                    call_stats: Vec::new(),
                    resident: true,
                }),
            }),
        );
        Ok(id)
    }

    fn store(&self, object: SerializedObject) -> Result<ObjectId, RemoteError> {
        let class_name = object.class_name.clone();
        let id = self.insert_object(object, ObjectRole::Primary)?;
        if let Err(e) = self.record_placement(id, &class_name) {
            self.objects.write().unwrap().remove(&id);
            return Err(e);
        }
        Ok(id)
    }

    fn call(
        &self,
        object_id: ObjectId,
        method: &str,
        args: &[Value],
    ) -> Result<(Value, f64), RemoteError> {
        let Some(entry) = self.entry(object_id) else {
            return Err(self.redirect_or_not_found(object_id));
        };
        if matches!(entry.role, ObjectRole::Replica) {
            // Replicas are read-only snapshots; methods run on the primary.
            return Err(self.redirect_or_not_found_primary(object_id));
        }
        let method_fn = self
            .registry
            .resolve_method(&entry.class_name, method, args.len())
            .map_err(RemoteError::from)?;

        let _permit = self.workers.as_ref().map(|w| w.acquire());
        let mut slot = entry.slot.lock().unwrap();
        let runtime = BackendRuntime { inner: self };
        let started = Instant::now();
        let result = {
            let mut ctx = MethodCtx {
                object_id,
                attrs: &mut slot.attributes,
                args,
                runtime: &runtime,
            };
            method_fn(&mut ctx)
        };
        let compute = started.elapsed();
        if self.throttle > 1.0 {
            std::thread::sleep(compute.mul_f64(self.throttle - 1.0));
        }
        // Wall time around the user method only (plus the throttle
        // stretch); frame decode/encode is excluded by construction.
        let server_seconds = started.elapsed().as_secs_f64();
        slot.call_stats.push((method.to_string(), server_seconds));
        self.method_times.add(method, server_seconds);

        match result {
            Ok(value) => Ok((value, server_seconds)),
            Err(e) => Err(RemoteError::new(ErrorCode::ExecutionFailed, e.to_string())),
        }
    }

    fn redirect_or_not_found_primary(&self, id: ObjectId) -> RemoteError {
        match self
            .metadata
            .request_ok(&Request::Lookup(LookupQuery::Object(id)))
        {
            Ok((Response::Lookup(LookupAnswer::Object(loc)), _)) => self.stamp(RemoteError::redirect(
                loc.primary_backend,
                format!("object {id} is a replica here; primary is {}", loc.primary_backend),
            )),
            _ => self.stamp(RemoteError::new(
                ErrorCode::ObjectNotFound,
                format!("object {id} has no known primary"),
            )),
        }
    }

    fn get_attr(&self, object_id: ObjectId, name: &str) -> Result<Value, RemoteError> {
        let Some(entry) = self.entry(object_id) else {
            return Err(self.redirect_or_not_found(object_id));
        };
        let descriptor = self
            .registry
            .descriptor(&entry.class_name)
            .map_err(RemoteError::from)?;
        if descriptor.find_attribute(name).is_none() {
            return Err(RemoteError::new(
                ErrorCode::SchemaViolation,
                format!("attribute `{name}` is not declared by `{}`", entry.class_name),
            ));
        }
        let slot = entry.slot.lock().unwrap();
        slot.attributes.get(name).cloned().ok_or_else(|| {
            RemoteError::new(ErrorCode::Internal, format!("declared attribute `{name}` missing"))
        })
    }

    fn set_attr(&self, object_id: ObjectId, name: &str, value: Value) -> Result<(), RemoteError> {
        let Some(entry) = self.entry(object_id) else {
            return Err(self.redirect_or_not_found(object_id));
        };
        if matches!(entry.role, ObjectRole::Replica) {
            return Err(self.redirect_or_not_found_primary(object_id));
        }
        let descriptor = self
            .registry
            .descriptor(&entry.class_name)
            .map_err(RemoteError::from)?;
        let Some(attr) = descriptor.find_attribute(name) else {
            return Err(RemoteError::new(
                ErrorCode::SchemaViolation,
                format!("attribute `{name}` is not declared by `{}`", entry.class_name),
            ));
        };
        if attr.kind != value.kind() {
            return Err(RemoteError::new(
                ErrorCode::SchemaViolation,
                format!(
                    "attribute `{name}` expects {}, got {}",
                    attr.kind,
                    value.kind()
                ),
            ));
        }
        let mut slot = entry.slot.lock().unwrap();
        slot.attributes.insert(name.to_string(), value);
        Ok(())
    }

    /// MOVE and REPLICATE share the transfer: serialize, push to the
    /// target (FETCH_OBJECT), update metadata with the acknowledgment in
    /// hand, then (for moves) drop the local copy. Target unreachable →
    /// transfer-failed with the object intact.
    fn transfer(
        &self,
        object_id: ObjectId,
        target: BackendId,
        keep_local: bool,
    ) -> Result<(), RemoteError> {
        if target == self.id {
            return Err(RemoteError::new(
                ErrorCode::InvalidRequest,
                "source and target backend are the same",
            ));
        }
        let Some(entry) = self.entry(object_id) else {
            return Err(self.redirect_or_not_found(object_id));
        };
        if matches!(entry.role, ObjectRole::Replica) {
            return Err(self.redirect_or_not_found_primary(object_id));
        }

        // Hold the slot for the whole transfer so calls serialize with it.
        let slot = entry.slot.lock().unwrap();
        let object = SerializedObject::new(
            slot.class_name.clone(),
            object_id,
            slot.attributes.clone(),
        );
        let role = if keep_local {
            ObjectRole::Replica
        } else {
            ObjectRole::Primary
        };
        let peer = self.peer(target)?;
        peer.request_ok(&Request::FetchObject { role, object })
            .map_err(|e| RemoteError::new(ErrorCode::TransferFailed, e.to_string()))?;

        let update = if keep_local {
            Request::Replicate {
                object_id,
                target,
            }
        } else {
            Request::Move { object_id, target }
        };
        self.metadata.request_ok(&update).map_err(|e| {
            RemoteError::new(
                ErrorCode::TransferFailed,
                format!("transferred but metadata update failed: {e}"),
            )
        })?;

        drop(slot);
        if !keep_local {
            self.objects.write().unwrap().remove(&object_id);
        }
        Ok(())
    }

    fn metrics(&self) -> BackendMetrics {
        let objects = self.objects.read().unwrap();
        let resident = objects.len() as u64;
        drop(objects);
        let (mut pb_sent, mut pb_recv, mut pm_sent, mut pm_recv) = (0, 0, 0, 0);
        for conn in self.peers.lock().unwrap().values() {
            let c = conn.counters();
            pb_sent += c.bytes_sent;
            pb_recv += c.bytes_received;
            pm_sent += c.messages_sent;
            pm_recv += c.messages_received;
        }
        let (bytes_in, bytes_out, messages_in, messages_out) = self
            .server_stats
            .get()
            .map(|s| {
                (
                    s.bytes_in.load(std::sync::atomic::Ordering::Relaxed),
                    s.bytes_out.load(std::sync::atomic::Ordering::Relaxed),
                    s.messages_in.load(std::sync::atomic::Ordering::Relaxed),
                    s.messages_out.load(std::sync::atomic::Ordering::Relaxed),
                )
            })
            .unwrap_or_default();
        BackendMetrics {
            resident_objects: resident,
            peak_rss_bytes: self.rss.peak_bytes(),
            current_rss_bytes: self.rss.current_bytes(),
            uptime_seconds: self.started.elapsed().as_secs_f64(),
            bytes_in,
            bytes_out,
            messages_in,
            messages_out,
            peer_bytes_sent: pb_sent,
            peer_bytes_received: pb_recv,
            peer_messages_sent: pm_sent,
            peer_messages_received: pm_recv,
            method_seconds: self.method_times.snapshot(),
        }
    }
}

/// Cross-object fetches for method bodies: local objects are read
/// directly, remote ones through GET_ATTR on a peer connection (counted
/// in the peer byte accounting).
struct BackendRuntime<'a> {
    inner: &'a BackendInner,
}

impl ObjectRuntime for BackendRuntime<'_> {
    fn get_attribute(&self, id: ObjectId, name: &str) -> Result<Value, RuntimeError> {
        if let Some(entry) = self.inner.entry(id) {
            let slot = entry.slot.lock().unwrap();
            return slot
                .attributes
                .get(name)
                .cloned()
                .ok_or_else(|| RuntimeError::Attribute(name.into(), "not present".into()));
        }
        let loc = match self
            .inner
            .metadata
            .request_ok(&Request::Lookup(LookupQuery::Object(id)))
        {
            Ok((Response::Lookup(LookupAnswer::Object(loc)), _)) => loc,
            _ => return Err(RuntimeError::ObjectNotFound(id.to_string())),
        };
        let peer = self
            .inner
            .peer(loc.primary_backend)
            .map_err(|e| RuntimeError::Unavailable(e.to_string()))?;
        match peer.request_ok(&Request::GetAttr {
            object_id: id,
            name: name.to_string(),
        }) {
            Ok((Response::GetAttr(v), _)) => Ok(v),
            Ok(_) => Err(RuntimeError::Unavailable("unexpected response".into())),
            Err(e) => Err(RuntimeError::Attribute(name.into(), e.to_string())),
        }
    }
}

struct BackendHandler {
    inner: Arc<BackendInner>,
}

impl Handler for BackendHandler {
    fn handle(&self, request: Request) -> Response {
        let inner = &self.inner;
        let err = |e: RemoteError| Response::Error(e.from_backend(inner.id));
        match request {
            Request::Store(StoreBody::Object(obj)) => match inner.store(obj) {
                Ok(id) => Response::Store(id),
                Err(e) => err(e),
            },
            Request::Store(StoreBody::Location(_)) => err(RemoteError::new(
                ErrorCode::InvalidRequest,
                "placement records belong to the metadata service",
            )),
            Request::Call {
                object_id,
                method,
                args,
            } => match inner.call(object_id, &method, &args) {
                Ok((result, server_seconds)) => Response::Call {
                    result,
                    server_seconds,
                },
                Err(e) => err(e),
            },
            Request::GetAttr { object_id, name } => match inner.get_attr(object_id, &name) {
                Ok(v) => Response::GetAttr(v),
                Err(e) => err(e),
            },
            Request::SetAttr {
                object_id,
                name,
                value,
            } => match inner.set_attr(object_id, &name, value) {
                Ok(()) => Response::SetAttr,
                Err(e) => err(e),
            },
            Request::Move { object_id, target } => {
                match inner.transfer(object_id, target, false) {
                    Ok(()) => Response::Move,
                    Err(e) => err(e),
                }
            }
            Request::Replicate { object_id, target } => {
                match inner.transfer(object_id, target, true) {
                    Ok(()) => Response::Replicate,
                    Err(e) => err(e),
                }
            }
            Request::FetchObject { role, object } => match inner.insert_object(object, role) {
                Ok(_) => Response::FetchObject,
                Err(e) => err(e),
            },
            Request::Health => Response::Health {
                uptime_seconds: inner.started.elapsed().as_secs_f64(),
            },
            Request::Metrics => Response::Metrics(inner.metrics().to_value()),
            Request::RegisterBackend { .. } | Request::Lookup(_) => err(RemoteError::new(
                ErrorCode::InvalidRequest,
                "not a backend operation",
            )),
        }
    }
}

pub struct RunningBackend {
    pub id: BackendId,
    pub local_addr: SocketAddr,
    inner: Arc<BackendInner>,
    server: ServerHandle,
}

impl RunningBackend {
    pub fn metrics(&self) -> BackendMetrics {
        self.inner.metrics()
    }

    pub fn resident_objects(&self) -> u64 {
        self.inner.objects.read().unwrap().len() as u64
    }

    pub fn call_stats(&self, id: ObjectId) -> Option<Vec<(String, f64)>> {
        let entry = self.inner.entry(id)?;
        let slot = entry.slot.lock().unwrap();
        Some(slot.call_stats.clone())
    }

    pub fn shutdown(&self) {
        self.server.shutdown();
    }
}

/// Bind, register with the metadata service and serve.
pub fn start_backend(
    listener: TcpListener,
    config: BackendConfig,
    registry: Arc<Registry>,
) -> Result<RunningBackend, BackendError> {
    let local_addr = listener.local_addr()?;
    let metadata = Connection::connect(&config.metadata_addr, ConnectionConfig::default())?;

    let id = if config.register {
        let (resp, _) = metadata
            .request(&Request::RegisterBackend {
                address: local_addr.to_string(),
                label: config.label.clone(),
                classes: registry.descriptors(),
            })
            .map_err(BackendError::Wire)?;
        match resp {
            Response::RegisterBackend(id) => id,
            Response::Error(e) => return Err(BackendError::Registration(e)),
            other => {
                return Err(BackendError::Wire(WireError::UnsupportedMessage(
                    other.msg_type(),
                )))
            }
        }
    } else {
        BackendId(0)
    };

    let inner = Arc::new(BackendInner {
        id,
        registry,
        objects: RwLock::new(HashMap::new()),
        method_times: MethodTimes::default(),
        rss: PeakTracker::start(),
        metadata,
        peers: Mutex::new(HashMap::new()),
        throttle: config.throttle.max(1.0),
        workers: config.worker_slots.map(Semaphore::new),
        started: Instant::now(),
        server_stats: OnceLock::new(),
    });
    let handler = BackendHandler {
        inner: Arc::clone(&inner),
    };
    let server = serve_listener(listener, Arc::new(handler))?;
    let _ = inner.server_stats.set(Arc::clone(&server.stats));

    log::info!("backend {id} ({}) serving on {local_addr}", config.label);
    Ok(RunningBackend {
        id,
        local_addr,
        inner,
        server,
    })
}
