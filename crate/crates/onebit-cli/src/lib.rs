//! Library half of the `onebit` command-line harness: experiment
//! specification, trial running with optional rayon parallelism, metric
//! aggregation, and CSV emission. The binary in `main.rs` is a thin
//! argument-parsing layer over this.

pub mod experiment;
pub mod options;
pub mod protocol;
