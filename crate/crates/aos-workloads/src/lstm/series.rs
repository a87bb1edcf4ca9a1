//! Time-series input: a synthetic generator standing in for the public
//! utilization dataset, and a CSV loader for substituting the real one.
//! Series are stored min-max normalized per covariate, with the bounds
//! kept for denormalization.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

/// Look-back window of the reference benchmark.
pub const DEFAULT_WINDOW: usize = 6;
/// CPU and memory utilization.
pub const COVARIATES: usize = 2;
/// Sampling period of the series (metadata only).
pub const SAMPLE_MINUTES: u64 = 5;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("dataset too short: {rows} rows, need more than {needed}")]
    TooShort { rows: usize, needed: usize },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: timestamps must be strictly increasing")]
    DataOrder { line: u64 },
    #[error("window must be at least 1")]
    InvalidWindow,
    #[error("train fraction must be in (0, 1)")]
    InvalidSplit,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// A normalized multivariate series plus its normalization bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    data: Vec<f64>,
    rows: usize,
    covariates: usize,
    bounds: Vec<(f64, f64)>,
}

impl TimeSeriesDataset {
    /// Normalize a raw row-major series to [0, 1] per covariate. A
    /// constant covariate maps to 0.0 and denormalizes back exactly.
    pub fn from_raw(rows: usize, covariates: usize, raw: Vec<f64>) -> TimeSeriesDataset {
        assert_eq!(raw.len(), rows * covariates);
        let mut bounds = Vec::with_capacity(covariates);
        for c in 0..covariates {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for r in 0..rows {
                let v = raw[r * covariates + c];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if rows == 0 {
                lo = 0.0;
                hi = 1.0;
            }
            bounds.push((lo, hi));
        }
        let mut data = raw;
        for r in 0..rows {
            for c in 0..covariates {
                let (lo, hi) = bounds[c];
                let v = &mut data[r * covariates + c];
                *v = if hi > lo { (*v - lo) / (hi - lo) } else { 0.0 };
            }
        }
        TimeSeriesDataset {
            data,
            rows,
            covariates,
            bounds,
        }
    }

    /// Rebuild from already-normalized data and bounds (attribute form).
    pub fn from_normalized(
        rows: usize,
        covariates: usize,
        data: Vec<f64>,
        bounds: Vec<(f64, f64)>,
    ) -> TimeSeriesDataset {
        assert_eq!(data.len(), rows * covariates);
        assert_eq!(bounds.len(), covariates);
        TimeSeriesDataset {
            data,
            rows,
            covariates,
            bounds,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn covariates(&self) -> usize {
        self.covariates
    }

    pub fn normalized(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.covariates..(i + 1) * self.covariates]
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn denormalize(&self, covariate: usize, v: f64) -> f64 {
        let (lo, hi) = self.bounds[covariate];
        v * (hi - lo) + lo
    }
}

/// Deterministic two-channel utilization series: daily plus short
/// periodic components with Gaussian noise, the memory channel coupled
/// to the CPU one, clamped to plausible percentage ranges.
pub fn generate_synthetic_series(rows: usize, seed: u64) -> Result<TimeSeriesDataset, SeriesError> {
    if rows < 2 {
        return Err(SeriesError::TooShort { rows, needed: 1 });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let cpu_noise = Normal::new(0.0, 4.0).expect("valid sigma");
    let mem_noise = Normal::new(0.0, 2.0).expect("valid sigma");
    // 5-minute sampling: 288 samples per day.
    let day = 288.0;
    let mut raw = Vec::with_capacity(rows * COVARIATES);
    for t in 0..rows {
        let phase = 2.0 * std::f64::consts::PI * t as f64;
        let cpu = 42.0
            + 23.0 * (phase / day).sin()
            + 7.0 * (phase / 47.0).sin()
            + cpu_noise.sample(&mut rng);
        let cpu = cpu.clamp(0.0, 100.0);
        let mem = 35.0
            + 12.0 * (phase / day + 0.9).sin()
            + 0.35 * (cpu - 42.0)
            + mem_noise.sample(&mut rng);
        let mem = mem.clamp(0.0, 100.0);
        raw.push(cpu);
        raw.push(mem);
    }
    Ok(TimeSeriesDataset::from_raw(rows, COVARIATES, raw))
}

/// Load `timestamp,cpu,mem` rows. Timestamps must be strictly
/// increasing; parse failures name the line.
pub fn load_series_csv(path: &Path) -> Result<TimeSeriesDataset, SeriesError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(csv_to_series_error)?;
    {
        let headers = reader.headers().map_err(csv_to_series_error)?;
        let expected = ["timestamp", "cpu", "mem"];
        let got: Vec<&str> = headers.iter().collect();
        if got != expected {
            return Err(SeriesError::Parse {
                line: 1,
                message: format!("expected header `timestamp,cpu,mem`, got `{}`", got.join(",")),
            });
        }
    }
    let mut raw = Vec::new();
    let mut rows = 0usize;
    let mut last_ts: Option<f64> = None;
    for record in reader.records() {
        let record = record.map_err(csv_to_series_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |idx: usize, name: &str| -> Result<f64, SeriesError> {
            let text = record.get(idx).ok_or_else(|| SeriesError::Parse {
                line,
                message: format!("missing column `{name}`"),
            })?;
            text.trim().parse::<f64>().map_err(|e| SeriesError::Parse {
                line,
                message: format!("column `{name}`: {e}"),
            })
        };
        let ts = field(0, "timestamp")?;
        let cpu = field(1, "cpu")?;
        let mem = field(2, "mem")?;
        if let Some(prev) = last_ts {
            if ts <= prev {
                return Err(SeriesError::DataOrder { line });
            }
        }
        last_ts = Some(ts);
        raw.push(cpu);
        raw.push(mem);
        rows += 1;
    }
    if rows < 2 {
        return Err(SeriesError::TooShort { rows, needed: 1 });
    }
    Ok(TimeSeriesDataset::from_raw(rows, COVARIATES, raw))
}

fn csv_to_series_error(e: csv::Error) -> SeriesError {
    let line = e.position().map_or(0, |p| p.line());
    match e.kind() {
        csv::ErrorKind::Io(_) => {
            SeriesError::Io(std::io::Error::new(std::io::ErrorKind::Other, e.to_string()))
        }
        _ => SeriesError::Parse {
            line,
            message: e.to_string(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn same_seed_same_series() {
        let a = generate_synthetic_series(500, 7).unwrap();
        let b = generate_synthetic_series(500, 7).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_series(500, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn normalization_hits_zero_and_one_per_channel() {
        let ds = generate_synthetic_series(800, 3).unwrap();
        for c in 0..ds.covariates() {
            let col: Vec<f64> = (0..ds.rows()).map(|r| ds.row(r)[c]).collect();
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(lo, 0.0);
            assert_eq!(hi, 1.0);
            assert!(col.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn channels_are_correlated() {
        let ds = generate_synthetic_series(2000, 11).unwrap();
        let n = ds.rows() as f64;
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for r in 0..ds.rows() {
            let x = ds.row(r)[0];
            let y = ds.row(r)[1];
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
        }
        let cov = sxy / n - (sx / n) * (sy / n);
        let r = cov / ((sxx / n - (sx / n).powi(2)).sqrt() * (syy / n - (sy / n).powi(2)).sqrt());
        assert!(r > 0.2, "channel correlation too weak: {r}");
    }

    #[test]
    fn denormalize_inverts_normalize() {
        let raw: Vec<f64> = (0..40).map(|t| 17.0 + (t as f64) * 0.37).collect();
        let raw2: Vec<f64> = raw.iter().flat_map(|&v| [v, 100.0 - v]).collect();
        let ds = TimeSeriesDataset::from_raw(40, 2, raw2.clone());
        for r in 0..40 {
            for c in 0..2 {
                let back = ds.denormalize(c, ds.row(r)[c]);
                assert!((back - raw2[r * 2 + c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_channel_round_trips_exactly() {
        let raw: Vec<f64> = (0..10).flat_map(|_| [5.5, 1.0]).collect();
        let ds = TimeSeriesDataset::from_raw(10, 2, raw);
        assert_eq!(ds.row(3)[0], 0.0);
        assert_eq!(ds.denormalize(0, ds.row(3)[0]), 5.5);
    }

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn csv_loads_in_row_order() {
        let f = write_csv("timestamp,cpu,mem\n0,10,20\n300,11,21\n600,12,22\n");
        let ds = load_series_csv(f.path()).unwrap();
        assert_eq!(ds.rows(), 3);
        // Min-max over the three rows: first row normalizes to zero.
        assert_eq!(ds.row(0), &[0.0, 0.0]);
        assert_eq!(ds.row(2), &[1.0, 1.0]);
    }

    #[test]
    fn csv_missing_column_names_the_line() {
        let f = write_csv("timestamp,cpu,mem\n0,10,20\n300,11\n600,12,22\n");
        match load_series_csv(f.path()) {
            Err(SeriesError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_bad_number_names_the_line() {
        let f = write_csv("timestamp,cpu,mem\n0,10,20\n300,eleven,21\n");
        match load_series_csv(f.path()) {
            Err(SeriesError::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("cpu"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_shuffled_timestamps_rejected() {
        let f = write_csv("timestamp,cpu,mem\n0,10,20\n600,12,22\n300,11,21\n");
        match load_series_csv(f.path()) {
            Err(SeriesError::DataOrder { line }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_wrong_header_rejected() {
        let f = write_csv("time,cpu,ram\n0,10,20\n");
        assert!(matches!(
            load_series_csv(f.path()),
            Err(SeriesError::Parse { line: 1, .. })
        ));
    }
}
