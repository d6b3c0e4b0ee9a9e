//! Smartphone accelerometer activity recognition.
//!
//! The pipeline runs in five stages:
//!
//! ```text
//! CSV / synthetic samples -> median filter -> 8-sample windows
//!     -> 42 time + frequency features -> classifier -> 10-vote smoothing
//!     -> MET calorie accounting
//! ```
//!
//! [`ingest`] reads and writes the labeled triaxial CSV format and generates
//! seeded synthetic recordings, [`dsp`] holds the median filter, windowing and
//! the 8-point DFT, [`features`] computes the window statistics, [`learn`]
//! trains the classifiers and ranks features, [`eval`] runs randomized
//! train/test benchmarks and [`stream`] does real-time recognition.

pub mod dsp;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod learn;
pub mod stream;

pub use features::{FeatureDataset, FeatureId, FeatureVector};
pub use ingest::{Activity, LabeledSeries, Sample};
pub use learn::{ClassifierSpec, TrainedModel};

/// Samples per analysis window.
pub const WINDOW_LEN: usize = 8;

/// Capture rate of the recordings.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 250.0;
