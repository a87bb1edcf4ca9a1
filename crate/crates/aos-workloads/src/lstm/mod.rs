//! Bivariate utilization forecasting: synthetic series or CSV input,
//! autoregressive windowing, a from-scratch LSTM trained with Adam on
//! MSE, and the four evaluation metrics.

pub mod active;
pub mod metrics;
pub mod model;
pub mod series;
pub mod train;
pub mod window;

pub use metrics::{evaluate, MetricRow};
pub use model::{AdamState, Gradients, LstmModel};
pub use series::{generate_synthetic_series, load_series_csv, SeriesError, TimeSeriesDataset};
pub use train::{train, EpochStats, TrainConfig, TrainError, TrainOutcome};
pub use window::{make_windows, WindowedSet};
