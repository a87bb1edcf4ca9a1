use std::net::TcpListener;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use aos_wire::{
    serve_listener, Handler, LookupAnswer, LookupQuery, Request, Response, ServerHandle, StoreBody,
};

use crate::state::{MetadataConfig, MetadataState};

struct MetadataHandler {
    state: Arc<MetadataState>,
}

impl Handler for MetadataHandler {
    fn handle(&self, request: Request) -> Response {
        let now = Instant::now();
        match request {
            Request::RegisterBackend {
                address,
                label,
                classes,
            } => match self.state.register_backend(&address, &label, classes, now) {
                Ok(id) => Response::RegisterBackend(id),
                Err(e) => Response::Error(e),
            },
            Request::Store(StoreBody::Location(loc)) => match self.state.record_placement(loc) {
                Ok(()) => Response::Store(aos_core::ObjectId::from_bytes([0; 16])),
                Err(e) => Response::Error(e),
            },
            Request::Store(StoreBody::Object(_)) => Response::Error(aos_wire::RemoteError::new(
                aos_wire::ErrorCode::InvalidRequest,
                "the metadata service does not store objects; send placements",
            )),
            Request::Move { object_id, target } => {
                match self.state.update_primary(object_id, target) {
                    Ok(()) => Response::Move,
                    Err(e) => Response::Error(e),
                }
            }
            Request::Replicate { object_id, target } => {
                match self.state.add_replica(object_id, target) {
                    Ok(()) => Response::Replicate,
                    Err(e) => Response::Error(e),
                }
            }
            Request::Lookup(LookupQuery::Object(id)) => match self.state.lookup_object(id) {
                Ok(loc) => Response::Lookup(LookupAnswer::Object(loc)),
                Err(e) => Response::Error(e),
            },
            Request::Lookup(LookupQuery::Class(name)) => match self.state.lookup_class(&name) {
                Ok(desc) => Response::Lookup(LookupAnswer::Class(desc)),
                Err(e) => Response::Error(e),
            },
            Request::Lookup(LookupQuery::Backends) => {
                Response::Lookup(LookupAnswer::Backends(self.state.list_backends(now)))
            }
            Request::Health => Response::Health {
                uptime_seconds: self.state.uptime_seconds(),
            },
            _ => Response::Error(aos_wire::RemoteError::new(
                aos_wire::ErrorCode::InvalidRequest,
                "not a metadata operation",
            )),
        }
    }
}

pub struct MetadataServer {
    pub state: Arc<MetadataState>,
    pub local_addr: std::net::SocketAddr,
    server: ServerHandle,
    sweeper_stop: Arc<AtomicBool>,
}

impl MetadataServer {
    pub fn shutdown(&self) {
        self.sweeper_stop.store(true, Ordering::Release);
        self.server.shutdown();
    }
}

impl Drop for MetadataServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Bind and serve a metadata service. When `sweep` is set, a background
/// thread polls backend health every heartbeat interval.
pub fn start_metadata(
    listener: TcpListener,
    config: MetadataConfig,
    sweep: bool,
) -> std::io::Result<MetadataServer> {
    let interval = config.heartbeat_interval;
    let state = Arc::new(MetadataState::new(config));
    let handler = MetadataHandler {
        state: Arc::clone(&state),
    };
    let server = serve_listener(listener, Arc::new(handler))?;
    let sweeper_stop = Arc::new(AtomicBool::new(false));
    if sweep {
        let state = Arc::clone(&state);
        let stop = Arc::clone(&sweeper_stop);
        std::thread::Builder::new()
            .name("aos-metadata-sweeper".into())
            .spawn(move || {
                while !stop.load(Ordering::Acquire) {
                    std::thread::sleep(interval);
                    if stop.load(Ordering::Acquire) {
                        break;
                    }
                    let report = state.sweep(Instant::now());
                    if !report.suspect.is_empty() {
                        log::warn!("suspect backends: {:?}", report.suspect);
                    }
                }
            })
            .expect("spawn sweeper");
    }
    Ok(MetadataServer {
        state,
        local_addr: server.local_addr,
        server,
        sweeper_stop,
    })
}
