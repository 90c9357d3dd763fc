//! Bearing fault-classification benchmark harness.
//!
//! The pipeline runs in the same order as the modules below: waveforms are
//! ingested (or synthesized), run-to-failure sequences are labeled, windows
//! are featurized, samples are partitioned by bearing or at random, and the
//! six classifiers are fit and scored on the held-out partition.

pub mod error;
pub mod features;
pub mod ingest;
pub mod labeling;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod runner;
pub mod splits;
pub mod synthgen;

pub use error::{Error, Result};
