//! Resident-set sampling via /proc. The peak reported by a tracker is
//! the larger of the sampled maximum and the kernel's VmHWM, so short
//! spikes between samples are not lost.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

pub const SAMPLE_INTERVAL: Duration = Duration::from_millis(50);

#[derive(Debug, Clone, Copy, Default)]
pub struct RssSample {
    pub current_bytes: u64,
    pub high_water_bytes: u64,
}

/// Read VmRSS and VmHWM for a process (`None` = self).
pub fn read_rss(pid: Option<u32>) -> std::io::Result<RssSample> {
    let path = match pid {
        Some(pid) => format!("/proc/{pid}/status"),
        None => "/proc/self/status".to_string(),
    };
    let status = std::fs::read_to_string(path)?;
    let mut sample = RssSample::default();
    for line in status.lines() {
        if let Some(rest) = line.strip_prefix("VmRSS:") {
            sample.current_bytes = parse_kb(rest)?;
        } else if let Some(rest) = line.strip_prefix("VmHWM:") {
            sample.high_water_bytes = parse_kb(rest)?;
        }
    }
    Ok(sample)
}

fn parse_kb(rest: &str) -> std::io::Result<u64> {
    rest.trim()
        .trim_end_matches(" kB")
        .trim()
        .parse::<u64>()
        .map(|kb| kb * 1024)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))
}

/// Samples the current process RSS every [`SAMPLE_INTERVAL`] on a
/// dedicated thread and tracks the peak.
pub struct PeakTracker {
    peak: Arc<AtomicU64>,
    current: Arc<AtomicU64>,
    stop: Arc<AtomicBool>,
}

impl PeakTracker {
    pub fn start() -> PeakTracker {
        let peak = Arc::new(AtomicU64::new(0));
        let current = Arc::new(AtomicU64::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        {
            let peak = Arc::clone(&peak);
            let current = Arc::clone(&current);
            let stop = Arc::clone(&stop);
            std::thread::Builder::new()
                .name("aos-rss-sampler".into())
                .spawn(move || {
                    while !stop.load(Ordering::Acquire) {
                        if let Ok(sample) = read_rss(None) {
                            current.store(sample.current_bytes, Ordering::Relaxed);
                            let observed = sample.current_bytes.max(sample.high_water_bytes);
                            peak.fetch_max(observed, Ordering::Relaxed);
                        }
                        std::thread::sleep(SAMPLE_INTERVAL);
                    }
                })
                .expect("spawn rss sampler");
        }
        PeakTracker {
            peak,
            current,
            stop,
        }
    }

    pub fn peak_bytes(&self) -> u64 {
        // Fold in the kernel high-water mark at read time as well, in
        // case the sampler has not run since a spike.
        let hwm = read_rss(None).map(|s| s.high_water_bytes).unwrap_or(0);
        self.peak.fetch_max(hwm, Ordering::Relaxed);
        self.peak.load(Ordering::Relaxed)
    }

    pub fn current_bytes(&self) -> u64 {
        self.current.load(Ordering::Relaxed)
    }
}

impl Drop for PeakTracker {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Release);
    }
}
