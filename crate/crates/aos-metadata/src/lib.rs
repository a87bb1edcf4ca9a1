//! The metadata service: a single authority that maps objects to
//! backends, serves class schemas to stub-only clients, and tracks
//! backend liveness by polling HEALTH.
//!
//! Placement is explicit and queryable, never heuristic. Liveness only
//! reports: a suspect backend is never re-placed or failed over
//! automatically.

mod service;
mod state;

pub use service::{start_metadata, MetadataServer};
pub use state::{MetadataConfig, MetadataState, SweepReport};
