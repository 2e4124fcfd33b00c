//! Parallel trajectory RMSD engine and I/O strategy benchmarks.
//!
//! Trajectories are read through one of several strategies (a shared
//! sequential file, pre-split segments, a chained view, a dense
//! random-access file, or in-memory synthetic data), split into contiguous
//! frame blocks, and processed by worker processes whose results and
//! per-rank timings are gathered on the orchestrator.

pub mod cli;
pub mod engine;
pub mod error;
pub mod model;
pub mod perf;
pub mod rmsd;
pub mod trjio;

pub use error::{Error, Result};
