use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Mutex, RwLock};
use std::time::{Duration, Instant};

use aos_core::{
    deserialize_value, serialize_value, ClassDescriptor, ObjectId, Value,
};
use aos_wire::{
    BackendId, BackendRecord, Connection, ConnectionConfig, ErrorCode, Liveness,
    ObjectLocationRecord, RemoteError, Request, Response,
};

#[derive(Debug, Clone)]
pub struct MetadataConfig {
    pub heartbeat_interval: Duration,
    /// Missed intervals before a backend is reported suspect.
    pub suspect_after: u32,
}

impl Default for MetadataConfig {
    fn default() -> Self {
        MetadataConfig {
            heartbeat_interval: Duration::from_secs(2),
            suspect_after: 3,
        }
    }
}

struct BackendEntry {
    address: String,
    label: String,
    last_heartbeat: Instant,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepReport {
    pub alive: Vec<BackendId>,
    pub suspect: Vec<BackendId>,
}

pub struct MetadataState {
    config: MetadataConfig,
    backends: Mutex<BTreeMap<BackendId, BackendEntry>>,
    next_backend_id: AtomicU32,
    locations: RwLock<HashMap<ObjectId, ObjectLocationRecord>>,
    classes: RwLock<BTreeMap<String, ClassDescriptor>>,
    started: Instant,
}

impl MetadataState {
    pub fn new(config: MetadataConfig) -> Self {
        MetadataState {
            config,
            backends: Mutex::new(BTreeMap::new()),
            next_backend_id: AtomicU32::new(1),
            locations: RwLock::new(HashMap::new()),
            classes: RwLock::new(BTreeMap::new()),
            started: Instant::now(),
        }
    }

    pub fn uptime_seconds(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    pub fn register_backend(
        &self,
        address: &str,
        label: &str,
        classes: Vec<ClassDescriptor>,
        now: Instant,
    ) -> Result<BackendId, RemoteError> {
        {
            // Validate all schemas before committing any of them.
            let existing = self.classes.read().unwrap();
            for c in &classes {
                if let Some(prev) = existing.get(&c.class_name) {
                    if prev != c {
                        return Err(RemoteError::new(
                            ErrorCode::SchemaConflict,
                            format!("class `{}` already registered with a different schema", c.class_name),
                        ));
                    }
                }
            }
        }
        let mut backends = self.backends.lock().unwrap();
        if backends.values().any(|b| b.address == address) {
            return Err(RemoteError::new(
                ErrorCode::AlreadyRegistered,
                format!("a backend is already registered at {address}"),
            ));
        }
        let id = BackendId(self.next_backend_id.fetch_add(1, Ordering::Relaxed));
        backends.insert(
            id,
            BackendEntry {
                address: address.to_string(),
                label: label.to_string(),
                last_heartbeat: now,
            },
        );
        drop(backends);
        let mut known = self.classes.write().unwrap();
        for c in classes {
            known.entry(c.class_name.clone()).or_insert(c);
        }
        Ok(id)
    }

    fn liveness(&self, entry: &BackendEntry, now: Instant) -> Liveness {
        let cutoff = self.config.heartbeat_interval * self.config.suspect_after;
        if now.duration_since(entry.last_heartbeat) > cutoff {
            Liveness::Suspect
        } else {
            Liveness::Alive
        }
    }

    pub fn list_backends(&self, now: Instant) -> Vec<BackendRecord> {
        let backends = self.backends.lock().unwrap();
        backends
            .iter()
            .map(|(id, e)| BackendRecord {
                id: *id,
                address: e.address.clone(),
                label: e.label.clone(),
                status: self.liveness(e, now),
            })
            .collect()
    }

    pub fn backend_address(&self, id: BackendId) -> Option<String> {
        self.backends.lock().unwrap().get(&id).map(|e| e.address.clone())
    }

    fn require_registered(&self, id: BackendId) -> Result<(), RemoteError> {
        if self.backends.lock().unwrap().contains_key(&id) {
            Ok(())
        } else {
            Err(RemoteError::new(
                ErrorCode::BackendUnavailable,
                format!("backend {id} is not registered"),
            ))
        }
    }

    /// Record (or overwrite) the placement of an object. Every referenced
    /// backend must be registered and the primary must not appear among
    /// the replicas.
    pub fn record_placement(&self, loc: ObjectLocationRecord) -> Result<(), RemoteError> {
        self.require_registered(loc.primary_backend)?;
        for r in &loc.replicas {
            self.require_registered(*r)?;
            if *r == loc.primary_backend {
                return Err(RemoteError::new(
                    ErrorCode::InvalidRequest,
                    "primary backend cannot be its own replica",
                ));
            }
        }
        self.locations.write().unwrap().insert(loc.object_id, loc);
        Ok(())
    }

    pub fn update_primary(&self, object_id: ObjectId, target: BackendId) -> Result<(), RemoteError> {
        self.require_registered(target)?;
        let mut locations = self.locations.write().unwrap();
        let loc = locations.get_mut(&object_id).ok_or_else(|| {
            RemoteError::new(ErrorCode::ObjectNotFound, format!("object {object_id} has no placement"))
        })?;
        loc.primary_backend = target;
        loc.replicas.retain(|r| *r != target);
        Ok(())
    }

    pub fn add_replica(&self, object_id: ObjectId, target: BackendId) -> Result<(), RemoteError> {
        self.require_registered(target)?;
        let mut locations = self.locations.write().unwrap();
        let loc = locations.get_mut(&object_id).ok_or_else(|| {
            RemoteError::new(ErrorCode::ObjectNotFound, format!("object {object_id} has no placement"))
        })?;
        if loc.primary_backend == target {
            return Err(RemoteError::new(
                ErrorCode::InvalidRequest,
                "cannot replicate an object onto its primary backend",
            ));
        }
        if !loc.replicas.contains(&target) {
            loc.replicas.push(target);
        }
        Ok(())
    }

    pub fn lookup_object(&self, object_id: ObjectId) -> Result<ObjectLocationRecord, RemoteError> {
        self.locations
            .read()
            .unwrap()
            .get(&object_id)
            .cloned()
            .ok_or_else(|| {
                RemoteError::new(ErrorCode::ObjectNotFound, format!("object {object_id} is unknown"))
            })
    }

    pub fn lookup_class(&self, name: &str) -> Result<ClassDescriptor, RemoteError> {
        self.classes.read().unwrap().get(name).cloned().ok_or_else(|| {
            RemoteError::new(
                ErrorCode::ClassNotRegistered,
                format!("class `{name}` is not registered at the metadata service"),
            )
        })
    }

    pub fn record_heartbeat(&self, id: BackendId, now: Instant) {
        if let Some(entry) = self.backends.lock().unwrap().get_mut(&id) {
            entry.last_heartbeat = now;
        }
    }

    /// Ping every backend with HEALTH and report liveness. Unreachable
    /// backends become suspect once their heartbeat ages out; there is no
    /// automatic re-placement.
    pub fn sweep(&self, now: Instant) -> SweepReport {
        let targets: Vec<(BackendId, String)> = {
            let backends = self.backends.lock().unwrap();
            backends
                .iter()
                .map(|(id, e)| (*id, e.address.clone()))
                .collect()
        };
        for (id, address) in targets {
            if ping(&address) {
                self.record_heartbeat(id, now);
            }
        }
        let mut report = SweepReport {
            alive: Vec::new(),
            suspect: Vec::new(),
        };
        let backends = self.backends.lock().unwrap();
        for (id, entry) in backends.iter() {
            match self.liveness(entry, now) {
                Liveness::Alive => report.alive.push(*id),
                Liveness::Suspect => report.suspect.push(*id),
            }
        }
        report
    }

    /// Snapshot of all placements: the canonical encoding of a ValueList
    /// of locations, each `[ObjectRef, Text class, Int primary, List replicas]`.
    pub fn snapshot(&self) -> Vec<u8> {
        let locations = self.locations.read().unwrap();
        let mut rows: Vec<&ObjectLocationRecord> = locations.values().collect();
        rows.sort_by_key(|l| l.object_id);
        let list = Value::List(
            rows.into_iter()
                .map(|l| {
                    Value::List(vec![
                        Value::ObjectRef(l.object_id),
                        Value::Text(l.class_name.clone()),
                        Value::Int(l.primary_backend.0 as i64),
                        Value::List(
                            l.replicas
                                .iter()
                                .map(|r| Value::Int(r.0 as i64))
                                .collect(),
                        ),
                    ])
                })
                .collect(),
        );
        serialize_value(&list)
    }

    pub fn write_snapshot(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.snapshot())
    }

    /// Load placements from a snapshot. Backends are not restored (they
    /// re-register), so locations referencing unknown backends are kept
    /// verbatim; the registration invariant applies to new placements.
    pub fn load_snapshot(&self, path: &Path) -> std::io::Result<usize> {
        let bytes = std::fs::read(path)?;
        let value = deserialize_value(&bytes)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))?;
        let rows = value
            .as_list()
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidData, "expected a list"))?;
        let mut restored = 0;
        let mut locations = self.locations.write().unwrap();
        for row in rows {
            let fields = row.as_list().ok_or_else(|| {
                std::io::Error::new(std::io::ErrorKind::InvalidData, "expected a location row")
            })?;
            let (id, class, primary, replicas) = match fields {
                [Value::ObjectRef(id), Value::Text(class), Value::Int(primary), Value::List(reps)] => {
                    (id, class, primary, reps)
                }
                _ => {
                    return Err(std::io::Error::new(
                        std::io::ErrorKind::InvalidData,
                        "malformed location row",
                    ))
                }
            };
            locations.insert(
                *id,
                ObjectLocationRecord {
                    object_id: *id,
                    class_name: class.clone(),
                    primary_backend: BackendId(*primary as u32),
                    replicas: replicas
                        .iter()
                        .filter_map(|v| v.as_int())
                        .map(|i| BackendId(i as u32))
                        .collect(),
                },
            );
            restored += 1;
        }
        Ok(restored)
    }
}

fn ping(address: &str) -> bool {
    let config = ConnectionConfig {
        connect_timeout: Some(Duration::from_millis(250)),
        response_timeout: Some(Duration::from_millis(500)),
        ..Default::default()
    };
    match Connection::connect(address, config) {
        Ok(conn) => matches!(conn.request(&Request::Health), Ok((Response::Health { .. }, _))),
        Err(_) => false,
    }
}
