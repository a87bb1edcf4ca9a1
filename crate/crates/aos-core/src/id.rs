use std::fmt;

use uuid::Uuid;

/// Identity of a persistent object. Stable across moves and replications;
/// never reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectId(Uuid);

impl ObjectId {
    pub fn new_random() -> Self {
        ObjectId(Uuid::new_v4())
    }

    pub fn from_bytes(bytes: [u8; 16]) -> Self {
        ObjectId(Uuid::from_bytes(bytes))
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        self.0.as_bytes()
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_unique() {
        let a = ObjectId::new_random();
        let b = ObjectId::new_random();
        assert_ne!(a, b);
    }

    #[test]
    fn byte_round_trip() {
        let a = ObjectId::new_random();
        assert_eq!(a, ObjectId::from_bytes(*a.as_bytes()));
    }
}
