//! Backend behavior over real sockets: store/call/attr flows, redirects,
//! move/replicate semantics, locality accounting and throttling.

use std::collections::BTreeMap;
use std::net::TcpListener;
use std::sync::Arc;
use std::time::{Duration, Instant};

use aos_backend::{start_backend, BackendConfig, RunningBackend};
use aos_core::{
    ClassDescriptor, MethodError, MethodTable, ObjectId, Registry, SerializedObject, Value,
    ValueKind,
};
use aos_metadata::{start_metadata, MetadataConfig, MetadataServer};
use aos_wire::{
    Connection, ConnectionConfig, ErrorCode, LookupQuery, ObjectRole, Request, Response, StoreBody,
    WireError,
};

fn counter_descriptor() -> ClassDescriptor {
    ClassDescriptor::new("test.counter")
        .attribute("count", ValueKind::Int)
        .attribute("data", ValueKind::FloatArray)
        .method("bump", vec![ValueKind::Int], ValueKind::Int)
        .method("fill", vec![ValueKind::Int, ValueKind::Float], ValueKind::Int)
        .method("scale", vec![ValueKind::Float], ValueKind::Float)
        .method("snooze", vec![ValueKind::Int], ValueKind::Int)
        .method("peek", vec![ValueKind::ObjectRef], ValueKind::Int)
        .method("fail", vec![], ValueKind::Null)
}

fn counter_impl() -> MethodTable {
    MethodTable::new()
        .with("bump", |ctx| {
            let delta = ctx.arg(0).as_int().ok_or(MethodError::BadArgument("delta".into()))?;
            let count = ctx.attrs.get("count").and_then(|v| v.as_int()).unwrap_or(0) + delta;
            ctx.attrs.insert("count".into(), Value::Int(count));
            Ok(Value::Int(count))
        })
        .with("fill", |ctx| {
            let n = ctx.arg(0).as_int().ok_or(MethodError::BadArgument("n".into()))? as usize;
            let v = ctx.arg(1).as_float().ok_or(MethodError::BadArgument("v".into()))?;
            ctx.attrs.insert(
                "data".into(),
                Value::FloatArray(aos_core::FloatArray::vector(vec![v; n])),
            );
            Ok(Value::Int(n as i64))
        })
        .with("scale", |ctx| {
            let f = ctx.arg(0).as_float().ok_or(MethodError::BadArgument("f".into()))?;
            let mut sum = 0.0;
            if let Some(Value::FloatArray(a)) = ctx.attrs.get_mut("data") {
                for x in a.data_mut() {
                    *x *= f;
                    sum += *x;
                }
            }
            Ok(Value::Float(sum))
        })
        .with("snooze", |ctx| {
            let ms = ctx.arg(0).as_int().unwrap_or(0);
            std::thread::sleep(Duration::from_millis(ms as u64));
            Ok(Value::Int(ms))
        })
        .with("peek", |ctx| {
            let other = ctx
                .arg(0)
                .as_object_ref()
                .ok_or(MethodError::BadArgument("ref".into()))?;
            let v = ctx.fetch_attribute(other, "count")?;
            Ok(v)
        })
        .with("fail", |_| Err(MethodError::failed("deliberate failure")))
}

fn executable_registry() -> Arc<Registry> {
    let r = Registry::new();
    r.register_class(counter_descriptor(), Some(counter_impl())).unwrap();
    Arc::new(r)
}

fn cluster(n: usize) -> (MetadataServer, Vec<RunningBackend>) {
    let meta = start_metadata(
        TcpListener::bind("127.0.0.1:0").unwrap(),
        MetadataConfig::default(),
        false,
    )
    .unwrap();
    let backends = (0..n)
        .map(|i| {
            start_backend(
                TcpListener::bind("127.0.0.1:0").unwrap(),
                BackendConfig::new(meta.local_addr.to_string(), format!("node-{i}")),
                executable_registry(),
            )
            .unwrap()
        })
        .collect();
    (meta, backends)
}

fn connect(backend: &RunningBackend) -> Connection {
    Connection::connect(&backend.local_addr.to_string(), ConnectionConfig::default()).unwrap()
}

fn counter_object(count: i64) -> SerializedObject {
    let mut attrs = BTreeMap::new();
    attrs.insert("count".into(), Value::Int(count));
    attrs.insert("data".into(), Value::FloatArray(aos_core::FloatArray::empty()));
    SerializedObject::new("test.counter", ObjectId::new_random(), attrs)
}

fn store(conn: &Connection, object: SerializedObject) -> ObjectId {
    match conn.request_ok(&Request::Store(StoreBody::Object(object))).unwrap().0 {
        Response::Store(id) => id,
        other => panic!("unexpected {other:?}"),
    }
}

fn call(conn: &Connection, id: ObjectId, method: &str, args: Vec<Value>) -> Result<(Value, f64), WireError> {
    let (resp, _) = conn.request_ok(&Request::Call {
        object_id: id,
        method: method.into(),
        args,
    })?;
    match resp {
        Response::Call {
            result,
            server_seconds,
        } => Ok((result, server_seconds)),
        other => panic!("unexpected {other:?}"),
    }
}

fn remote_code(err: WireError) -> ErrorCode {
    match err {
        WireError::Remote(e) => e.code,
        other => panic!("expected remote error, got {other}"),
    }
}

#[test]
fn store_call_and_resident_counting() {
    let (meta, backends) = cluster(1);
    let conn = connect(&backends[0]);

    let id = store(&conn, counter_object(0));
    assert_eq!(backends[0].resident_objects(), 1);

    // Placement is recorded at the metadata service.
    let loc = meta.state.lookup_object(id).unwrap();
    assert_eq!(loc.primary_backend, backends[0].id);
    assert!(loc.replicas.is_empty());

    // Mutations persist in the slot across calls.
    let (v, secs) = call(&conn, id, "bump", vec![Value::Int(3)]).unwrap();
    assert_eq!(v, Value::Int(3));
    assert!(secs >= 0.0);
    let (v, _) = call(&conn, id, "bump", vec![Value::Int(4)]).unwrap();
    assert_eq!(v, Value::Int(7));

    for _ in 0..4 {
        store(&conn, counter_object(0));
    }
    assert_eq!(backends[0].resident_objects(), 5);
    assert_eq!(backends[0].metrics().resident_objects, 5);
}

#[test]
fn store_rejects_bad_schema_and_unknown_classes() {
    let (_meta, backends) = cluster(1);
    let conn = connect(&backends[0]);

    let unknown = SerializedObject::new("no.such", ObjectId::new_random(), BTreeMap::new());
    let err = conn
        .request_ok(&Request::Store(StoreBody::Object(unknown)))
        .unwrap_err();
    assert_eq!(remote_code(err), ErrorCode::ClassNotRegistered);

    let mut missing = counter_object(0);
    missing.attributes.remove("data");
    let err = conn
        .request_ok(&Request::Store(StoreBody::Object(missing)))
        .unwrap_err();
    assert_eq!(remote_code(err), ErrorCode::SchemaViolation);

    let mut extra = counter_object(0);
    extra.attributes.insert("bogus".into(), Value::Null);
    let err = conn
        .request_ok(&Request::Store(StoreBody::Object(extra)))
        .unwrap_err();
    assert_eq!(remote_code(err), ErrorCode::SchemaViolation);
}

#[test]
fn descriptor_only_backend_cannot_store() {
    let meta = start_metadata(
        TcpListener::bind("127.0.0.1:0").unwrap(),
        MetadataConfig::default(),
        false,
    )
    .unwrap();
    let registry = Registry::new();
    registry.register_class(counter_descriptor(), None).unwrap();
    let backend = start_backend(
        TcpListener::bind("127.0.0.1:0").unwrap(),
        BackendConfig::new(meta.local_addr.to_string(), "stub-node"),
        Arc::new(registry),
    )
    .unwrap();
    let conn = connect(&backend);
    let err = conn
        .request_ok(&Request::Store(StoreBody::Object(counter_object(0))))
        .unwrap_err();
    assert_eq!(remote_code(err), ErrorCode::NotExecutableHere);
}

#[test]
fn call_errors_happen_before_execution() {
    let (_meta, backends) = cluster(1);
    let conn = connect(&backends[0]);
    let id = store(&conn, counter_object(0));

    // Wrong arity is rejected before dispatch: no state change.
    let err = call(&conn, id, "bump", vec![]).unwrap_err();
    assert_eq!(remote_code(err), ErrorCode::ArityMismatch);
    let err = call(&conn, id, "nope", vec![]).unwrap_err();
    assert_eq!(remote_code(err), ErrorCode::MethodNotFound);
    let (v, _) = call(&conn, id, "bump", vec![Value::Int(1)]).unwrap();
    assert_eq!(v, Value::Int(1), "failed precondition checks must not execute");

    let err = call(&conn, ObjectId::new_random(), "bump", vec![Value::Int(1)]).unwrap_err();
    assert_eq!(remote_code(err), ErrorCode::ObjectNotFound);

    let err = call(&conn, id, "fail", vec![]).unwrap_err();
    match err {
        WireError::Remote(e) => {
            assert_eq!(e.code, ErrorCode::ExecutionFailed);
            assert!(e.message.contains("deliberate failure"));
            assert_eq!(e.origin_backend, backends[0].id);
        }
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn get_and_set_attributes() {
    let (_meta, backends) = cluster(1);
    let conn = connect(&backends[0]);
    let id = store(&conn, counter_object(9));

    let (resp, _) = conn
        .request_ok(&Request::GetAttr {
            object_id: id,
            name: "count".into(),
        })
        .unwrap();
    assert_eq!(resp, Response::GetAttr(Value::Int(9)));

    conn.request_ok(&Request::SetAttr {
        object_id: id,
        name: "count".into(),
        value: Value::Int(42),
    })
    .unwrap();
    let (resp, _) = conn
        .request_ok(&Request::GetAttr {
            object_id: id,
            name: "count".into(),
        })
        .unwrap();
    assert_eq!(resp, Response::GetAttr(Value::Int(42)));

    let err = conn
        .request_ok(&Request::GetAttr {
            object_id: id,
            name: "undeclared".into(),
        })
        .unwrap_err();
    assert_eq!(remote_code(err), ErrorCode::SchemaViolation);

    let err = conn
        .request_ok(&Request::SetAttr {
            object_id: id,
            name: "data".into(),
            value: Value::Int(1),
        })
        .unwrap_err();
    assert_eq!(remote_code(err), ErrorCode::SchemaViolation);
}

#[test]
fn move_redirects_calls_on_the_old_backend() {
    let (meta, backends) = cluster(2);
    let conn1 = connect(&backends[0]);
    let conn2 = connect(&backends[1]);
    let id = store(&conn1, counter_object(0));
    call(&conn1, id, "bump", vec![Value::Int(5)]).unwrap();

    conn1
        .request_ok(&Request::Move {
            object_id: id,
            target: backends[1].id,
        })
        .unwrap();

    // Metadata reflects the move.
    assert_eq!(meta.state.lookup_object(id).unwrap().primary_backend, backends[1].id);
    assert_eq!(backends[0].resident_objects(), 0);

    // The old backend redirects with the correct target.
    let err = call(&conn1, id, "bump", vec![Value::Int(1)]).unwrap_err();
    match err {
        WireError::Remote(e) => {
            assert_eq!(e.code, ErrorCode::Redirect);
            assert_eq!(e.redirect_to, Some(backends[1].id));
        }
        other => panic!("unexpected {other}"),
    }

    // Retrying on the new backend succeeds with the moved state.
    let (v, _) = call(&conn2, id, "bump", vec![Value::Int(1)]).unwrap();
    assert_eq!(v, Value::Int(6));
}

#[test]
fn move_to_dead_backend_leaves_object_intact() {
    let (_meta, backends) = cluster(3);
    let conn1 = connect(&backends[0]);
    let id = store(&conn1, counter_object(2));

    // Backend 3 is registered but its listener is down.
    backends[2].shutdown();
    std::thread::sleep(Duration::from_millis(50));

    let err = conn1
        .request_ok(&Request::Move {
            object_id: id,
            target: backends[2].id,
        })
        .unwrap_err();
    assert_eq!(remote_code(err), ErrorCode::TransferFailed);

    // All-or-nothing: the original still answers.
    let (v, _) = call(&conn1, id, "bump", vec![Value::Int(1)]).unwrap();
    assert_eq!(v, Value::Int(3));
}

#[test]
fn replicas_are_read_only_snapshots() {
    let (meta, backends) = cluster(2);
    let conn1 = connect(&backends[0]);
    let conn2 = connect(&backends[1]);
    let id = store(&conn1, counter_object(5));

    conn1
        .request_ok(&Request::Replicate {
            object_id: id,
            target: backends[1].id,
        })
        .unwrap();
    let loc = meta.state.lookup_object(id).unwrap();
    assert_eq!(loc.primary_backend, backends[0].id);
    assert_eq!(loc.replicas, vec![backends[1].id]);

    // The replica equals the primary at replication time.
    let (resp, _) = conn2
        .request_ok(&Request::GetAttr {
            object_id: id,
            name: "count".into(),
        })
        .unwrap();
    assert_eq!(resp, Response::GetAttr(Value::Int(5)));

    // No write propagation: the primary moves on, the snapshot stays.
    call(&conn1, id, "bump", vec![Value::Int(1)]).unwrap();
    let (resp, _) = conn2
        .request_ok(&Request::GetAttr {
            object_id: id,
            name: "count".into(),
        })
        .unwrap();
    assert_eq!(resp, Response::GetAttr(Value::Int(5)));

    // Calls and writes on the replica redirect to the primary.
    let err = call(&conn2, id, "bump", vec![Value::Int(1)]).unwrap_err();
    match err {
        WireError::Remote(e) => {
            assert_eq!(e.code, ErrorCode::Redirect);
            assert_eq!(e.redirect_to, Some(backends[0].id));
        }
        other => panic!("unexpected {other}"),
    }
    let err = conn2
        .request_ok(&Request::SetAttr {
            object_id: id,
            name: "count".into(),
            value: Value::Int(0),
        })
        .unwrap_err();
    assert_eq!(remote_code(err), ErrorCode::Redirect);
}

#[test]
fn in_place_mutation_moves_no_attribute_bytes() {
    let (_meta, backends) = cluster(1);
    let conn = connect(&backends[0]);
    let id = store(&conn, counter_object(0));

    // Materialize a 10 MB attribute server-side.
    let n = 1_310_720; // × 8 bytes = 10 MiB
    call(&conn, id, "fill", vec![Value::Int(n), Value::Float(1.0)]).unwrap();

    let before = conn.counters();
    let (sum, _) = call(&conn, id, "scale", vec![Value::Float(2.0)]).unwrap();
    let after = conn.counters();

    assert_eq!(sum, Value::Float(2.0 * n as f64));
    let moved = (after.bytes_sent - before.bytes_sent) + (after.bytes_received - before.bytes_received);
    assert!(
        moved < 10 * 1024,
        "mutating call moved {moved} bytes on the wire"
    );
}

#[test]
fn calls_serialize_per_object_but_not_across_objects() {
    let (_meta, backends) = cluster(1);
    let conn = Arc::new(connect(&backends[0]));
    let a = store(&conn, counter_object(0));
    let b = store(&conn, counter_object(0));

    let elapsed_same = {
        let started = Instant::now();
        let t1 = {
            let conn = Arc::clone(&conn);
            std::thread::spawn(move || call(&conn, a, "snooze", vec![Value::Int(150)]).unwrap())
        };
        let t2 = {
            let conn = Arc::clone(&conn);
            std::thread::spawn(move || call(&conn, a, "snooze", vec![Value::Int(150)]).unwrap())
        };
        t1.join().unwrap();
        t2.join().unwrap();
        started.elapsed()
    };
    assert!(elapsed_same >= Duration::from_millis(300), "same-object calls overlapped: {elapsed_same:?}");

    let elapsed_diff = {
        let started = Instant::now();
        let t1 = {
            let conn = Arc::clone(&conn);
            std::thread::spawn(move || call(&conn, a, "snooze", vec![Value::Int(150)]).unwrap())
        };
        let t2 = {
            let conn = Arc::clone(&conn);
            std::thread::spawn(move || call(&conn, b, "snooze", vec![Value::Int(150)]).unwrap())
        };
        t1.join().unwrap();
        t2.join().unwrap();
        started.elapsed()
    };
    assert!(elapsed_diff < Duration::from_millis(290), "cross-object calls serialized: {elapsed_diff:?}");
}

#[test]
fn cross_object_fetch_works_locally_and_across_backends() {
    let (_meta, backends) = cluster(2);
    let conn1 = connect(&backends[0]);
    let conn2 = connect(&backends[1]);

    let local_a = store(&conn1, counter_object(11));
    let local_b = store(&conn1, counter_object(22));
    let remote = store(&conn2, counter_object(33));

    // Same backend.
    let (v, _) = call(&conn1, local_a, "peek", vec![Value::ObjectRef(local_b)]).unwrap();
    assert_eq!(v, Value::Int(22));
    // Self-fetch is served from the live attributes.
    let (v, _) = call(&conn1, local_a, "peek", vec![Value::ObjectRef(local_a)]).unwrap();
    assert_eq!(v, Value::Int(11));
    // Across backends, through a peer connection.
    let (v, _) = call(&conn1, local_a, "peek", vec![Value::ObjectRef(remote)]).unwrap();
    assert_eq!(v, Value::Int(33));
    let m = backends[0].metrics();
    assert!(m.peer_bytes_sent > 0 && m.peer_bytes_received > 0);
}

#[test]
fn throttle_stretches_measured_server_time() {
    let meta = start_metadata(
        TcpListener::bind("127.0.0.1:0").unwrap(),
        MetadataConfig::default(),
        false,
    )
    .unwrap();
    let mut config = BackendConfig::new(meta.local_addr.to_string(), "slow-node");
    config.throttle = 3.0;
    let backend = start_backend(
        TcpListener::bind("127.0.0.1:0").unwrap(),
        config,
        executable_registry(),
    )
    .unwrap();
    let conn = connect(&backend);
    let id = store(&conn, counter_object(0));

    let (_, server_seconds) = call(&conn, id, "snooze", vec![Value::Int(100)]).unwrap();
    // 100 ms of "compute" under a 3× throttle: ±25% tolerance.
    assert!(
        (0.225..=0.375).contains(&server_seconds),
        "throttled time {server_seconds}"
    );

    let stats = backend.call_stats(id).unwrap();
    assert_eq!(stats.len(), 1);
    assert_eq!(stats[0].0, "snooze");
}

#[test]
fn fetch_object_requires_an_implementation() {
    let (_meta, backends) = cluster(1);
    let conn = connect(&backends[0]);
    let object = SerializedObject::new("no.such", ObjectId::new_random(), BTreeMap::new());
    let err = conn
        .request_ok(&Request::FetchObject {
            role: ObjectRole::Primary,
            object,
        })
        .unwrap_err();
    assert_eq!(remote_code(err), ErrorCode::ClassNotRegistered);
}

#[test]
fn lookup_is_not_a_backend_operation() {
    let (_meta, backends) = cluster(1);
    let conn = connect(&backends[0]);
    let err = conn
        .request_ok(&Request::Lookup(LookupQuery::Backends))
        .unwrap_err();
    assert_eq!(remote_code(err), ErrorCode::InvalidRequest);
}
