//! Liveness over real sockets: controlled shutdown makes a backend
//! suspect within one sweep, and a restarted listener returns to alive.

use std::net::TcpListener;
use std::sync::Arc;
use std::time::{Duration, Instant};

use aos_metadata::{start_metadata, MetadataConfig};
use aos_wire::{
    serve_listener, Connection, ConnectionConfig, Handler, Liveness, LookupAnswer, LookupQuery,
    Request, Response, ServerHandle,
};

struct HealthOnly;

impl Handler for HealthOnly {
    fn handle(&self, request: Request) -> Response {
        match request {
            Request::Health => Response::Health { uptime_seconds: 0.1 },
            _ => Response::Error(aos_wire::RemoteError::new(
                aos_wire::ErrorCode::InvalidRequest,
                "health only",
            )),
        }
    }
}

fn fake_backend_on(addr: &str) -> ServerHandle {
    // Rebinding the same port right after a shutdown can briefly race the
    // old accept loop; retry for a moment.
    let deadline = Instant::now() + Duration::from_secs(5);
    loop {
        match TcpListener::bind(addr) {
            Ok(listener) => return serve_listener(listener, Arc::new(HealthOnly)).unwrap(),
            Err(e) => {
                if Instant::now() > deadline {
                    panic!("could not rebind {addr}: {e}");
                }
                std::thread::sleep(Duration::from_millis(50));
            }
        }
    }
}

#[test]
fn sweep_tracks_shutdown_and_restart() {
    // Short interval so the aging math stays fast; the sweeps in this
    // test are driven manually against a simulated clock.
    let config = MetadataConfig {
        heartbeat_interval: Duration::from_millis(50),
        suspect_after: 3,
    };
    let meta = start_metadata(TcpListener::bind("127.0.0.1:0").unwrap(), config, false).unwrap();

    let backend = fake_backend_on("127.0.0.1:0");
    let backend_addr = backend.local_addr.to_string();

    let t0 = Instant::now();
    let id = meta
        .state
        .register_backend(&backend_addr, "edge-small", Vec::new(), t0)
        .unwrap();

    // All alive while the backend answers.
    let report = meta.state.sweep(t0 + Duration::from_millis(400));
    assert_eq!(report.alive, vec![id]);
    assert!(report.suspect.is_empty());

    // Controlled shutdown: the ping fails, the heartbeat ages out, and a
    // single sweep reports the backend suspect.
    backend.shutdown();
    std::thread::sleep(Duration::from_millis(100));
    let report = meta.state.sweep(t0 + Duration::from_millis(900));
    assert_eq!(report.suspect, vec![id]);
    assert!(report.alive.is_empty());

    // Restart at the same address: the next sweep revives it.
    let _backend2 = fake_backend_on(&backend_addr);
    let report = meta.state.sweep(t0 + Duration::from_millis(1200));
    assert_eq!(report.alive, vec![id]);
    assert!(report.suspect.is_empty());
}

#[test]
fn wire_level_registration_and_lookup() {
    let meta = start_metadata(
        TcpListener::bind("127.0.0.1:0").unwrap(),
        MetadataConfig::default(),
        false,
    )
    .unwrap();
    let conn =
        Connection::connect(&meta.local_addr.to_string(), ConnectionConfig::default()).unwrap();

    let (resp, _) = conn
        .request_ok(&Request::RegisterBackend {
            address: "127.0.0.1:45001".into(),
            label: "cloud".into(),
            classes: vec![aos_core::ClassDescriptor::new("w.t").method(
                "m",
                vec![],
                aos_core::ValueKind::Null,
            )],
        })
        .unwrap();
    let id = match resp {
        Response::RegisterBackend(id) => id,
        other => panic!("unexpected {other:?}"),
    };

    let (resp, _) = conn.request_ok(&Request::Lookup(LookupQuery::Backends)).unwrap();
    match resp {
        Response::Lookup(LookupAnswer::Backends(list)) => {
            assert_eq!(list.len(), 1);
            assert_eq!(list[0].id, id);
            assert_eq!(list[0].label, "cloud");
            assert_eq!(list[0].status, Liveness::Alive);
        }
        other => panic!("unexpected {other:?}"),
    }

    // Stub-mode descriptor fetch.
    let (resp, _) = conn
        .request_ok(&Request::Lookup(LookupQuery::Class("w.t".into())))
        .unwrap();
    match resp {
        Response::Lookup(LookupAnswer::Class(desc)) => {
            assert_eq!(desc.class_name, "w.t");
            assert_eq!(desc.methods.len(), 1);
        }
        other => panic!("unexpected {other:?}"),
    }

    // Unknown class surfaces the right code.
    let err = conn
        .request_ok(&Request::Lookup(LookupQuery::Class("nope".into())))
        .unwrap_err();
    match err {
        aos_wire::WireError::Remote(e) => {
            assert_eq!(e.code, aos_wire::ErrorCode::ClassNotRegistered)
        }
        other => panic!("unexpected {other}"),
    }
}
