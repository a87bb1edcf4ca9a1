//! Wire protocol of the aos store.
//!
//! Frames are length-prefixed over a reliable byte stream:
//!
//! ```text
//! magic "AOS1" (4) | payload length u32 (4) | msg_type u8 (1) | request_id u64 (8) | payload
//! ```
//!
//! The 17-byte header plus a payload whose schema is fixed per message
//! type (see [`message`]) is the whole contract, bit-exact. A response
//! carries the request_id of its request, so a connection may have many
//! requests in flight; frame writes are serialized, reads are demuxed.
//!
//! Every connection keeps exact byte and message counters for both
//! directions — the offload benchmarks are built on that accounting.

pub mod connection;
pub mod error;
pub mod frame;
pub mod message;
pub mod server;
pub mod types;

pub use connection::{ByteCounters, Connection, ConnectionConfig, ExchangeStats, LatencyInjection};
pub use error::{ErrorCode, RemoteError, WireError};
pub use frame::{FrameHeader, HEADER_LEN, MAGIC, MAX_PAYLOAD};
pub use message::{LookupAnswer, LookupQuery, ObjectRole, Request, Response, StoreBody};
pub use server::{serve_listener, Handler, ServerHandle, ServerStats};
pub use types::{BackendId, BackendRecord, Liveness, ObjectLocationRecord};
