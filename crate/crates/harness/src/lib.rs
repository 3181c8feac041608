//! Monte-Carlo sweeps over the private synthetic control mechanisms.
//!
//! A [`SweepConfig`] names algorithms, a grid of regularization weights,
//! budgets and dataset sizes, and a repetition count. [`run_sweep`] expands
//! the grid into cells, runs each cell `reps` times in parallel with
//! per-repetition seeds, and returns the records together with per-cell
//! aggregates. [`report`] writes them as CSV.

pub mod aggregate;
pub mod config;
pub mod error;
pub mod report;
pub mod sweep;

pub use aggregate::{aggregate, AggregateRow};
pub use config::{Algorithm, DatasetMode, LambdaMode, Size, SweepConfig};
pub use error::{HarnessError, Result};
pub use sweep::{run_single, run_sweep, SingleRun, SweepOutput, SweepRecord};
