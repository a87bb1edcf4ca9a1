//! Per-backend metrics: resident objects, RSS, per-method wall time and
//! network traffic. Counters are monotone within a run; the METRICS
//! response encodes a snapshot as a list of `[name, value]` pairs.

use std::collections::BTreeMap;
use std::sync::Mutex;

use aos_core::Value;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BackendMetrics {
    pub resident_objects: u64,
    pub peak_rss_bytes: u64,
    pub current_rss_bytes: u64,
    pub uptime_seconds: f64,
    pub bytes_in: u64,
    pub bytes_out: u64,
    pub messages_in: u64,
    pub messages_out: u64,
    pub peer_bytes_sent: u64,
    pub peer_bytes_received: u64,
    pub peer_messages_sent: u64,
    pub peer_messages_received: u64,
    pub method_seconds: BTreeMap<String, f64>,
}

impl BackendMetrics {
    pub fn to_value(&self) -> Value {
        let int = |v: u64| Value::Int(v as i64);
        let pair = |name: &str, v: Value| Value::List(vec![Value::Text(name.into()), v]);
        Value::List(vec![
            pair("resident_objects", int(self.resident_objects)),
            pair("peak_rss_bytes", int(self.peak_rss_bytes)),
            pair("current_rss_bytes", int(self.current_rss_bytes)),
            pair("uptime_seconds", Value::Float(self.uptime_seconds)),
            pair("bytes_in", int(self.bytes_in)),
            pair("bytes_out", int(self.bytes_out)),
            pair("messages_in", int(self.messages_in)),
            pair("messages_out", int(self.messages_out)),
            pair("peer_bytes_sent", int(self.peer_bytes_sent)),
            pair("peer_bytes_received", int(self.peer_bytes_received)),
            pair("peer_messages_sent", int(self.peer_messages_sent)),
            pair("peer_messages_received", int(self.peer_messages_received)),
            pair(
                "method_seconds",
                Value::List(
                    self.method_seconds
                        .iter()
                        .map(|(name, secs)| {
                            Value::List(vec![Value::Text(name.clone()), Value::Float(*secs)])
                        })
                        .collect(),
                ),
            ),
        ])
    }

    pub fn from_value(value: &Value) -> Option<BackendMetrics> {
        let mut out = BackendMetrics::default();
        for entry in value.as_list()? {
            let fields = entry.as_list()?;
            let name = fields.first()?.as_text()?;
            let v = fields.get(1)?;
            match name {
                "resident_objects" => out.resident_objects = v.as_int()? as u64,
                "peak_rss_bytes" => out.peak_rss_bytes = v.as_int()? as u64,
                "current_rss_bytes" => out.current_rss_bytes = v.as_int()? as u64,
                "uptime_seconds" => out.uptime_seconds = v.as_float()?,
                "bytes_in" => out.bytes_in = v.as_int()? as u64,
                "bytes_out" => out.bytes_out = v.as_int()? as u64,
                "messages_in" => out.messages_in = v.as_int()? as u64,
                "messages_out" => out.messages_out = v.as_int()? as u64,
                "peer_bytes_sent" => out.peer_bytes_sent = v.as_int()? as u64,
                "peer_bytes_received" => out.peer_bytes_received = v.as_int()? as u64,
                "peer_messages_sent" => out.peer_messages_sent = v.as_int()? as u64,
                "peer_messages_received" => out.peer_messages_received = v.as_int()? as u64,
                "method_seconds" => {
                    for row in v.as_list()? {
                        let kv = row.as_list()?;
                        out.method_seconds
                            .insert(kv.first()?.as_text()?.to_string(), kv.get(1)?.as_float()?);
                    }
                }
                _ => {}
            }
        }
        Some(out)
    }
}

/// Accumulator for per-method wall time.
#[derive(Default)]
pub struct MethodTimes {
    inner: Mutex<BTreeMap<String, f64>>,
}

impl MethodTimes {
    pub fn add(&self, method: &str, seconds: f64) {
        let mut map = self.inner.lock().unwrap();
        *map.entry(method.to_string()).or_insert(0.0) += seconds;
    }

    pub fn snapshot(&self) -> BTreeMap<String, f64> {
        self.inner.lock().unwrap().clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_value_round_trip() {
        let mut m = BackendMetrics {
            resident_objects: 3,
            peak_rss_bytes: 1 << 24,
            current_rss_bytes: 1 << 23,
            uptime_seconds: 12.5,
            bytes_in: 100,
            bytes_out: 200,
            messages_in: 5,
            messages_out: 5,
            peer_bytes_sent: 42,
            peer_bytes_received: 24,
            peer_messages_sent: 2,
            peer_messages_received: 2,
            method_seconds: BTreeMap::new(),
        };
        m.method_seconds.insert("train".into(), 1.25);
        let back = BackendMetrics::from_value(&m.to_value()).unwrap();
        assert_eq!(back, m);
    }
}
