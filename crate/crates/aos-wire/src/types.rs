//! Shared records carried by the protocol: backend identity, backend
//! directory entries and object placement.

use aos_core::codec::{self, Reader};
use aos_core::{DecodeError, ObjectId};

/// Small unique integer naming a backend; assigned by the metadata
/// service at registration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BackendId(pub u32);

impl std::fmt::Display for BackendId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Liveness {
    Alive,
    Suspect,
}

/// Directory entry for a registered backend.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendRecord {
    pub id: BackendId,
    pub address: String,
    pub label: String,
    pub status: Liveness,
}

impl BackendRecord {
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        codec::put_u32(out, self.id.0);
        codec::put_str(out, &self.address);
        codec::put_str(out, &self.label);
        codec::put_u8(out, matches!(self.status, Liveness::Suspect) as u8);
    }

    pub fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let id = BackendId(r.u32("backend id")?);
        let address = r.str("backend address")?;
        let label = r.str("backend label")?;
        let status = match r.u8("backend status")? {
            0 => Liveness::Alive,
            _ => Liveness::Suspect,
        };
        Ok(BackendRecord {
            id,
            address,
            label,
            status,
        })
    }
}

/// Placement of one object: the primary copy plus read-only replicas.
/// The primary is never in the replica set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectLocationRecord {
    pub object_id: ObjectId,
    pub class_name: String,
    pub primary_backend: BackendId,
    pub replicas: Vec<BackendId>,
}

impl ObjectLocationRecord {
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(self.object_id.as_bytes());
        codec::put_str(out, &self.class_name);
        codec::put_u32(out, self.primary_backend.0);
        codec::put_u32(out, self.replicas.len() as u32);
        for r in &self.replicas {
            codec::put_u32(out, r.0);
        }
    }

    pub fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let raw = r.raw(16, "object id")?;
        let object_id = ObjectId::from_bytes(raw.try_into().unwrap());
        let class_name = r.str("class name")?;
        let primary_backend = BackendId(r.u32("primary backend")?);
        let count = r.u32("replica count")? as usize;
        let mut replicas = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            replicas.push(BackendId(r.u32("replica id")?));
        }
        Ok(ObjectLocationRecord {
            object_id,
            class_name,
            primary_backend,
            replicas,
        })
    }
}
