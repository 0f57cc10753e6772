//! Threshold selection from normal traffic, complexity classification of
//! flagged sequences, and a path-counting oracle for topology queries.

mod baseline;
mod complexity;
mod paths;

use thiserror::Error;

pub use baseline::{
    compute_threshold, run_baseline, samples_csv, threshold_value, BaselineSample, DEFAULT_WARMUP,
};
pub use complexity::{
    classify_candidates, classify_complexity, classify_measurements, default_probe_lengths,
    measure_prefixes, most_severe, ComplexityClass, ComplexityVerdict, Measurement, ModelFit,
    TIE_TOLERANCE,
};
pub use paths::{count_simple_paths, Multigraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CalibrateError {
    #[error("no samples after the initialization window")]
    NoSamples,
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("need at least 4 distinct probe lengths, got {0}")]
    TooFewLengths(usize),
    #[error("probe length {length} outside 1..={max}")]
    BadLength { length: usize, max: usize },
    #[error("cannot classify an empty sequence")]
    EmptySequence,
    #[error("only true-positive candidates are classified")]
    NotCandidate,
    #[error("event {index} failed: {message}")]
    Dispatch { index: usize, message: String },
    #[error("{0}")]
    Registry(String),
}
