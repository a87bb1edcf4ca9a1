//! Client side of a connection: synchronous request/response with
//! multiplexing. Many threads may share one connection; frame writes are
//! serialized under a mutex while responses are demuxed by request_id on
//! a dedicated reader thread.

use std::collections::HashMap;
use std::io::Write;
use std::net::TcpStream;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use crate::error::WireError;
use crate::frame::{self, HEADER_LEN};
use crate::message::{Request, Response};

/// Fixed artificial delay per direction, for exploring slow networks.
#[derive(Debug, Clone, Copy, Default)]
pub struct LatencyInjection {
    pub send: Duration,
    pub receive: Duration,
}

#[derive(Debug, Clone, Default)]
pub struct ConnectionConfig {
    pub latency: Option<LatencyInjection>,
    pub response_timeout: Option<Duration>,
    pub connect_timeout: Option<Duration>,
}

/// Monotone totals for one connection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ByteCounters {
    pub bytes_sent: u64,
    pub bytes_received: u64,
    pub messages_sent: u64,
    pub messages_received: u64,
}

/// Exact sizes of one request/response exchange.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExchangeStats {
    pub bytes_sent: u64,
    pub bytes_received: u64,
}

#[derive(Default)]
struct Counters {
    bytes_sent: AtomicU64,
    bytes_received: AtomicU64,
    messages_sent: AtomicU64,
    messages_received: AtomicU64,
}

type PendingMap = Mutex<HashMap<u64, mpsc::SyncSender<(u8, Vec<u8>)>>>;

pub struct Connection {
    writer: Mutex<TcpStream>,
    pending: Arc<PendingMap>,
    counters: Arc<Counters>,
    closed: Arc<AtomicBool>,
    next_id: AtomicU64,
    config: ConnectionConfig,
    peer: String,
}

impl Connection {
    pub fn connect(addr: &str, config: ConnectionConfig) -> Result<Connection, WireError> {
        let stream = match config.connect_timeout {
            Some(t) => {
                let sock_addr = addr
                    .parse()
                    .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, format!("{e}")))?;
                TcpStream::connect_timeout(&sock_addr, t)?
            }
            None => TcpStream::connect(addr)?,
        };
        stream.set_nodelay(true)?;
        let reader_stream = stream.try_clone()?;

        let pending: Arc<PendingMap> = Arc::new(Mutex::new(HashMap::new()));
        let counters = Arc::new(Counters::default());
        let closed = Arc::new(AtomicBool::new(false));

        {
            let pending = Arc::clone(&pending);
            let counters = Arc::clone(&counters);
            let closed = Arc::clone(&closed);
            std::thread::Builder::new()
                .name("aos-conn-reader".into())
                .spawn(move || reader_loop(reader_stream, pending, counters, closed))
                .expect("spawn reader thread");
        }

        Ok(Connection {
            writer: Mutex::new(stream),
            pending,
            counters,
            closed,
            next_id: AtomicU64::new(1),
            peer: addr.to_string(),
            config,
        })
    }

    pub fn peer(&self) -> &str {
        &self.peer
    }

    pub fn counters(&self) -> ByteCounters {
        ByteCounters {
            bytes_sent: self.counters.bytes_sent.load(Ordering::Relaxed),
            bytes_received: self.counters.bytes_received.load(Ordering::Relaxed),
            messages_sent: self.counters.messages_sent.load(Ordering::Relaxed),
            messages_received: self.counters.messages_received.load(Ordering::Relaxed),
        }
    }

    /// Send a request and block until its response arrives. Responses of
    /// other in-flight requests may arrive in between; they are routed to
    /// their own callers. The returned stats are the exact frame sizes of
    /// this exchange.
    pub fn request(&self, req: &Request) -> Result<(Response, ExchangeStats), WireError> {
        if self.closed.load(Ordering::Acquire) {
            return Err(WireError::ConnectionClosed);
        }
        let request_type = req.msg_type();
        let request_id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let payload = req.encode_payload();
        let frame = frame::encode_frame(request_type, request_id, &payload)?;

        let (tx, rx) = mpsc::sync_channel(1);
        self.pending.lock().unwrap().insert(request_id, tx);

        if let Some(lat) = self.config.latency {
            if !lat.send.is_zero() {
                std::thread::sleep(lat.send);
            }
        }

        let write_result = {
            let mut writer = self.writer.lock().unwrap();
            writer.write_all(&frame).and_then(|_| writer.flush())
        };
        if let Err(e) = write_result {
            self.pending.lock().unwrap().remove(&request_id);
            return Err(WireError::Io(e));
        }
        self.counters
            .bytes_sent
            .fetch_add(frame.len() as u64, Ordering::Relaxed);
        self.counters.messages_sent.fetch_add(1, Ordering::Relaxed);

        let received = match self.config.response_timeout {
            Some(t) => rx.recv_timeout(t).map_err(|e| match e {
                mpsc::RecvTimeoutError::Timeout => {
                    self.pending.lock().unwrap().remove(&request_id);
                    WireError::ResponseTimeout
                }
                mpsc::RecvTimeoutError::Disconnected => WireError::ConnectionClosed,
            })?,
            None => rx.recv().map_err(|_| WireError::ConnectionClosed)?,
        };
        let (resp_type, resp_payload) = received;

        if let Some(lat) = self.config.latency {
            if !lat.receive.is_zero() {
                std::thread::sleep(lat.receive);
            }
        }

        let response = Response::decode(request_type, resp_type, &resp_payload)?;
        let stats = ExchangeStats {
            bytes_sent: frame.len() as u64,
            bytes_received: (HEADER_LEN + resp_payload.len()) as u64,
        };
        Ok((response, stats))
    }

    /// Like [`Connection::request`] but collapses ERROR responses into
    /// `Err(WireError::Remote)`. Byte accounting still lands in the
    /// connection counters.
    pub fn request_ok(&self, req: &Request) -> Result<(Response, ExchangeStats), WireError> {
        let (resp, stats) = self.request(req)?;
        match resp {
            Response::Error(e) => Err(WireError::Remote(e)),
            ok => Ok((ok, stats)),
        }
    }
}

fn reader_loop(
    mut stream: TcpStream,
    pending: Arc<PendingMap>,
    counters: Arc<Counters>,
    closed: Arc<AtomicBool>,
) {
    loop {
        match frame::read_frame(&mut stream) {
            Ok(Some((header, payload))) => {
                counters
                    .bytes_received
                    .fetch_add((HEADER_LEN + payload.len()) as u64, Ordering::Relaxed);
                counters.messages_received.fetch_add(1, Ordering::Relaxed);
                let sender = pending.lock().unwrap().remove(&header.request_id);
                match sender {
                    Some(tx) => {
                        // Receiver may have timed out; dropping the frame
                        // then is correct.
                        let _ = tx.send((header.msg_type, payload));
                    }
                    None => {
                        log::warn!(
                            "dropping response for unknown request_id {}",
                            header.request_id
                        );
                    }
                }
            }
            Ok(None) => break,
            Err(e) => {
                log::debug!("connection reader stopping: {e}");
                break;
            }
        }
    }
    closed.store(true, Ordering::Release);
    // Fail everything still in flight.
    pending.lock().unwrap().clear();
}
