//! Protocol-level integration tests: counter exactness against a
//! transport tap, multiplexing, error surfaces and frame properties.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use aos_core::{ObjectId, Value};
use aos_wire::message::msg_type;
use aos_wire::{
    frame, serve_listener, Connection, ConnectionConfig, ErrorCode, Handler, LatencyInjection,
    Request, Response, ServerHandle, WireError,
};
use proptest::prelude::*;

struct EchoHandler;

impl Handler for EchoHandler {
    fn handle(&self, request: Request) -> Response {
        match request {
            Request::Health => Response::Health {
                uptime_seconds: 1.5,
            },
            Request::Call { args, .. } => {
                // Sleep encoded in the first Int arg, to exercise
                // out-of-order completion.
                if let Some(Value::Int(ms)) = args.first() {
                    std::thread::sleep(Duration::from_millis(*ms as u64));
                }
                Response::Call {
                    result: Value::List(args),
                    server_seconds: 0.25,
                }
            }
            _ => Response::Error(aos_wire::RemoteError::new(
                ErrorCode::InvalidRequest,
                "not supported by the echo handler",
            )),
        }
    }
}

fn echo_server() -> (ServerHandle, String) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let handle = serve_listener(listener, Arc::new(EchoHandler)).unwrap();
    let addr = handle.local_addr.to_string();
    (handle, addr)
}

#[test]
fn health_round_trip() {
    let (_srv, addr) = echo_server();
    let conn = Connection::connect(&addr, ConnectionConfig::default()).unwrap();
    let (resp, _) = conn.request(&Request::Health).unwrap();
    assert_eq!(
        resp,
        Response::Health {
            uptime_seconds: 1.5
        }
    );
}

#[test]
fn byte_counters_match_independent_reencoding() {
    let (_srv, addr) = echo_server();
    let conn = Connection::connect(&addr, ConnectionConfig::default()).unwrap();

    let req = Request::Call {
        object_id: ObjectId::from_bytes([7; 16]),
        method: "echo".into(),
        args: vec![Value::Int(0), Value::Text("abc".into())],
    };
    let before = conn.counters();
    let (resp, stats) = conn.request(&req).unwrap();
    let after = conn.counters();

    // Oracle: re-encode both messages independently. A fresh connection
    // assigns request_id 1.
    let expected_req = frame::encode_frame(req.msg_type(), 1, &req.encode_payload()).unwrap();
    let expected_resp = frame::encode_frame(resp.msg_type(), 1, &resp.encode_payload()).unwrap();

    assert_eq!(stats.bytes_sent, expected_req.len() as u64);
    assert_eq!(stats.bytes_received, expected_resp.len() as u64);
    assert_eq!(after.bytes_sent - before.bytes_sent, expected_req.len() as u64);
    assert_eq!(
        after.bytes_received - before.bytes_received,
        expected_resp.len() as u64
    );
    assert_eq!(after.messages_sent, 1);
    assert_eq!(after.messages_received, 1);
}

/// Byte-forwarding proxy that counts what actually crosses the wire.
fn tap_proxy(upstream: String) -> (String, Arc<AtomicU64>, Arc<AtomicU64>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let to_server = Arc::new(AtomicU64::new(0));
    let to_client = Arc::new(AtomicU64::new(0));
    let ts = Arc::clone(&to_server);
    let tc = Arc::clone(&to_client);
    std::thread::spawn(move || {
        let (client, _) = listener.accept().unwrap();
        let server = TcpStream::connect(&upstream).unwrap();
        client.set_nodelay(true).unwrap();
        server.set_nodelay(true).unwrap();
        let mut c_read = client.try_clone().unwrap();
        let mut s_write = server.try_clone().unwrap();
        let ts2 = Arc::clone(&ts);
        std::thread::spawn(move || {
            let mut buf = [0u8; 4096];
            while let Ok(n) = c_read.read(&mut buf) {
                if n == 0 || s_write.write_all(&buf[..n]).is_err() {
                    break;
                }
                ts2.fetch_add(n as u64, Ordering::Relaxed);
            }
        });
        let mut s_read = server;
        let mut c_write = client;
        let mut buf = [0u8; 4096];
        while let Ok(n) = s_read.read(&mut buf) {
            if n == 0 || c_write.write_all(&buf[..n]).is_err() {
                break;
            }
            tc.fetch_add(n as u64, Ordering::Relaxed);
        }
    });
    (addr, to_server, to_client)
}

#[test]
fn counters_are_exact_against_a_transport_tap() {
    let (_srv, addr) = echo_server();
    let (proxy_addr, to_server, to_client) = tap_proxy(addr);
    let conn = Connection::connect(&proxy_addr, ConnectionConfig::default()).unwrap();

    for i in 0..7u8 {
        let req = Request::Call {
            object_id: ObjectId::from_bytes([i; 16]),
            method: "echo".into(),
            args: vec![Value::Int(0), Value::Bytes(vec![i; (i as usize) * 37])],
        };
        conn.request(&req).unwrap();
    }
    conn.request(&Request::Health).unwrap();

    // The tap increments its totals a moment after forwarding; give it a
    // beat to catch up before comparing.
    let counters = conn.counters();
    let deadline = Instant::now() + Duration::from_secs(2);
    while (to_server.load(Ordering::Relaxed) != counters.bytes_sent
        || to_client.load(Ordering::Relaxed) != counters.bytes_received)
        && Instant::now() < deadline
    {
        std::thread::sleep(Duration::from_millis(5));
    }
    assert_eq!(counters.bytes_sent, to_server.load(Ordering::Relaxed));
    assert_eq!(counters.bytes_received, to_client.load(Ordering::Relaxed));
    assert_eq!(counters.messages_sent, 8);
    assert_eq!(counters.messages_received, 8);
}

#[test]
fn concurrent_requests_are_matched_by_request_id() {
    let (_srv, addr) = echo_server();
    let conn = Arc::new(Connection::connect(&addr, ConnectionConfig::default()).unwrap());

    let slow = {
        let conn = Arc::clone(&conn);
        std::thread::spawn(move || {
            let req = Request::Call {
                object_id: ObjectId::from_bytes([1; 16]),
                method: "m".into(),
                args: vec![Value::Int(150), Value::Text("slow".into())],
            };
            conn.request(&req).unwrap().0
        })
    };
    // Give the slow request a head start so the fast response overtakes it.
    std::thread::sleep(Duration::from_millis(30));
    let fast = {
        let conn = Arc::clone(&conn);
        std::thread::spawn(move || {
            let req = Request::Call {
                object_id: ObjectId::from_bytes([2; 16]),
                method: "m".into(),
                args: vec![Value::Int(0), Value::Text("fast".into())],
            };
            conn.request(&req).unwrap().0
        })
    };

    let slow_resp = slow.join().unwrap();
    let fast_resp = fast.join().unwrap();
    match (slow_resp, fast_resp) {
        (Response::Call { result: a, .. }, Response::Call { result: b, .. }) => {
            assert_eq!(
                a,
                Value::List(vec![Value::Int(150), Value::Text("slow".into())])
            );
            assert_eq!(b, Value::List(vec![Value::Int(0), Value::Text("fast".into())]));
        }
        other => panic!("unexpected responses: {other:?}"),
    }
}

#[test]
fn unknown_message_type_gets_unsupported_error() {
    let (_srv, addr) = echo_server();
    let mut stream = TcpStream::connect(&addr).unwrap();
    let raw = frame::encode_frame(0x6E, 42, &[]).unwrap();
    stream.write_all(&raw).unwrap();
    let (header, payload) = frame::read_frame(&mut stream).unwrap().unwrap();
    assert_eq!(header.request_id, 42);
    let resp = Response::decode(0x6E & 0x7F, header.msg_type, &payload);
    // The request type doesn't matter for ERROR decoding.
    match resp {
        Ok(Response::Error(e)) => assert_eq!(e.code, ErrorCode::UnsupportedMessage),
        other => panic!("expected error response, got {other:?}"),
    }
}

#[test]
fn bad_magic_kills_the_connection() {
    let (_srv, addr) = echo_server();
    let mut stream = TcpStream::connect(&addr).unwrap();
    stream.write_all(b"XXXXXXXXXXXXXXXXXXXXXXXX").unwrap();
    // One ERROR frame comes back, then EOF.
    let (header, payload) = frame::read_frame(&mut stream).unwrap().unwrap();
    assert_eq!(header.msg_type, msg_type::ERROR);
    let resp = Response::decode(msg_type::HEALTH, header.msg_type, &payload).unwrap();
    match resp {
        Response::Error(e) => assert_eq!(e.code, ErrorCode::ProtocolMismatch),
        other => panic!("expected protocol mismatch, got {other:?}"),
    }
    assert!(matches!(frame::read_frame(&mut stream), Ok(None) | Err(_)));
}

#[test]
fn connection_reset_is_a_transport_error() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        drop(stream);
    });
    let conn = Connection::connect(&addr, ConnectionConfig::default()).unwrap();
    std::thread::sleep(Duration::from_millis(50));
    let err = conn.request(&Request::Health).unwrap_err();
    assert!(
        matches!(err, WireError::ConnectionClosed | WireError::Io(_)),
        "unexpected error: {err}"
    );
}

#[test]
fn response_timeout_fires() {
    // A listener that accepts and never answers.
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        std::thread::sleep(Duration::from_secs(10));
        drop(stream);
    });
    let conn = Connection::connect(
        &addr,
        ConnectionConfig {
            response_timeout: Some(Duration::from_millis(100)),
            ..Default::default()
        },
    )
    .unwrap();
    let err = conn.request(&Request::Health).unwrap_err();
    assert!(matches!(err, WireError::ResponseTimeout));
}

#[test]
fn latency_injection_delays_both_directions() {
    let (_srv, addr) = echo_server();
    let conn = Connection::connect(
        &addr,
        ConnectionConfig {
            latency: Some(LatencyInjection {
                send: Duration::from_millis(40),
                receive: Duration::from_millis(40),
            }),
            ..Default::default()
        },
    )
    .unwrap();
    let started = Instant::now();
    conn.request(&Request::Health).unwrap();
    let elapsed = started.elapsed();
    assert!(elapsed >= Duration::from_millis(80), "took {elapsed:?}");
}

fn arb_value() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(Value::Int),
        any::<f64>().prop_map(Value::Float),
        "[a-z]{0,12}".prop_map(Value::Text),
        prop::collection::vec(any::<u8>(), 0..32).prop_map(Value::Bytes),
        prop::collection::vec(any::<f64>(), 0..16)
            .prop_map(|d| Value::FloatArray(aos_core::FloatArray::vector(d))),
        any::<[u8; 16]>().prop_map(|b| Value::ObjectRef(ObjectId::from_bytes(b))),
    ]
}

fn arb_request() -> impl Strategy<Value = Request> {
    prop_oneof![
        Just(Request::Health),
        Just(Request::Metrics),
        (any::<[u8; 16]>(), "[a-z]{1,10}", prop::collection::vec(arb_value(), 0..5)).prop_map(
            |(id, method, args)| Request::Call {
                object_id: ObjectId::from_bytes(id),
                method,
                args,
            }
        ),
        (any::<[u8; 16]>(), "[a-z]{1,10}").prop_map(|(id, name)| Request::GetAttr {
            object_id: ObjectId::from_bytes(id),
            name,
        }),
        (any::<[u8; 16]>(), "[a-z]{1,10}", arb_value()).prop_map(|(id, name, value)| {
            Request::SetAttr {
                object_id: ObjectId::from_bytes(id),
                name,
                value,
            }
        }),
        (any::<[u8; 16]>(), any::<u32>()).prop_map(|(id, t)| Request::Move {
            object_id: ObjectId::from_bytes(id),
            target: aos_wire::BackendId(t),
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(600))]

    #[test]
    fn request_frames_round_trip(req in arb_request(), request_id in any::<u64>()) {
        let encoded = frame::encode_frame(req.msg_type(), request_id, &req.encode_payload()).unwrap();
        let mut cursor = std::io::Cursor::new(&encoded);
        let (header, payload) = frame::read_frame(&mut cursor).unwrap().unwrap();
        prop_assert_eq!(header.request_id, request_id);
        let back = Request::decode(header.msg_type, &payload).unwrap();
        prop_assert_eq!(back, req);
    }
}
