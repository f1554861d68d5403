//! Operational surface of the toolkit: synthetic datasets, training and
//! evaluation of the four front ends (CFA, oracle and estimated Wiener,
//! none), SJR sweeps and attention export. The `hrrp` binary wraps these.

pub mod attention;
pub mod config;
pub mod dataset;
pub mod error;
pub mod frontend;
pub mod metrics;
pub mod svg;
pub mod sweep;
pub mod train;

pub use config::{Config, InputNorm, Mode};
pub use dataset::{generate, Dataset, Manifest, SampleRecord};
pub use error::{PipelineError, Result};
pub use metrics::Metrics;
pub use train::{evaluate, split_dataset, train, TrainOptions, TrainingState};
