//! Server side: accept loop, per-connection reader, one worker thread
//! per request so a connection can have several requests in flight.

use std::io::Write;
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use crate::error::{RemoteError, WireError};
use crate::frame::{self, HEADER_LEN};
use crate::message::{msg_type, Request, Response};

pub trait Handler: Send + Sync + 'static {
    fn handle(&self, request: Request) -> Response;
}

/// Aggregate traffic counters for one served listener.
#[derive(Default)]
pub struct ServerStats {
    pub bytes_in: AtomicU64,
    pub bytes_out: AtomicU64,
    pub messages_in: AtomicU64,
    pub messages_out: AtomicU64,
}

pub struct ServerHandle {
    pub local_addr: std::net::SocketAddr,
    pub stats: Arc<ServerStats>,
    shutdown: Arc<AtomicBool>,
}

impl ServerHandle {
    pub fn shutdown(&self) {
        self.shutdown.store(true, Ordering::Release);
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Serve a listener on background threads until the handle is dropped.
pub fn serve_listener(listener: TcpListener, handler: Arc<dyn Handler>) -> std::io::Result<ServerHandle> {
    let local_addr = listener.local_addr()?;
    listener.set_nonblocking(true)?;
    let stats = Arc::new(ServerStats::default());
    let shutdown = Arc::new(AtomicBool::new(false));

    {
        let stats = Arc::clone(&stats);
        let shutdown = Arc::clone(&shutdown);
        std::thread::Builder::new()
            .name("aos-accept".into())
            .spawn(move || loop {
                if shutdown.load(Ordering::Acquire) {
                    break;
                }
                match listener.accept() {
                    Ok((stream, _)) => {
                        let handler = Arc::clone(&handler);
                        let stats = Arc::clone(&stats);
                        std::thread::Builder::new()
                            .name("aos-serve-conn".into())
                            .spawn(move || serve_connection(stream, handler, stats))
                            .expect("spawn connection thread");
                    }
                    Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                        std::thread::sleep(Duration::from_millis(10));
                    }
                    Err(e) => {
                        log::warn!("accept failed: {e}");
                        std::thread::sleep(Duration::from_millis(50));
                    }
                }
            })
            .expect("spawn accept thread");
    }

    Ok(ServerHandle {
        local_addr,
        stats,
        shutdown,
    })
}

fn serve_connection(stream: TcpStream, handler: Arc<dyn Handler>, stats: Arc<ServerStats>) {
    if stream.set_nodelay(true).is_err() {
        return;
    }
    let reader = stream.try_clone();
    let Ok(mut reader) = reader else { return };
    let writer = Arc::new(Mutex::new(stream));

    loop {
        match frame::read_frame(&mut reader) {
            Ok(Some((header, payload))) => {
                stats
                    .bytes_in
                    .fetch_add((HEADER_LEN + payload.len()) as u64, Ordering::Relaxed);
                stats.messages_in.fetch_add(1, Ordering::Relaxed);

                let handler = Arc::clone(&handler);
                let writer = Arc::clone(&writer);
                let stats = Arc::clone(&stats);
                std::thread::Builder::new()
                    .name("aos-request".into())
                    .spawn(move || {
                        let response = match Request::decode(header.msg_type, &payload) {
                            Ok(request) => handler.handle(request),
                            Err(e) => Response::Error(RemoteError::new(e.code(), e.to_string())),
                        };
                        let out_payload = response.encode_payload();
                        let frame = match frame::encode_frame(
                            response.msg_type(),
                            header.request_id,
                            &out_payload,
                        ) {
                            Ok(f) => f,
                            Err(_) => {
                                // Response larger than the frame cap: report
                                // instead of silently dropping.
                                let err = Response::Error(RemoteError::new(
                                    WireError::FrameTooLarge(out_payload.len() as u64).code(),
                                    "response exceeds frame cap",
                                ));
                                frame::encode_frame(
                                    err.msg_type(),
                                    header.request_id,
                                    &err.encode_payload(),
                                )
                                .expect("error frame fits")
                            }
                        };
                        let mut w = writer.lock().unwrap();
                        if w.write_all(&frame).and_then(|_| w.flush()).is_ok() {
                            stats
                                .bytes_out
                                .fetch_add(frame.len() as u64, Ordering::Relaxed);
                            stats.messages_out.fetch_add(1, Ordering::Relaxed);
                        }
                    })
                    .expect("spawn request thread");
            }
            Ok(None) => break,
            Err(WireError::ProtocolMismatch) => {
                // Can't trust the stream's framing anymore; answer once
                // and drop the connection.
                let err = Response::Error(RemoteError::new(
                    WireError::ProtocolMismatch.code(),
                    "bad frame magic",
                ));
                let frame =
                    frame::encode_frame(msg_type::ERROR, 0, &err.encode_payload()).expect("fits");
                let mut w = writer.lock().unwrap();
                let _ = w.write_all(&frame);
                break;
            }
            Err(e) => {
                log::debug!("server connection closing: {e}");
                break;
            }
        }
    }
}
