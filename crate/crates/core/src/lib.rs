//! Multiple-outlier detection in samples with Exponential and Pareto tails.
//!
//! The crate is organized around a single workflow: take an ordered sample,
//! compute an upper-outlier test statistic, compare it against a Monte-Carlo
//! table of the statistic under the Exp(1) null, and drive that comparison
//! through block, inward-sequential, outward-sequential, or tail-sweep
//! procedures. A density-mixture route (Exponential bulk plus Gaussian
//! contamination, fitted by EM) covers clustered outliers that spacing and
//! max statistics miss. Pareto-tailed data enters through the log transform
//! that maps a Pareto tail onto an Exponential one.
//!
//! Supporting modules provide the distribution families used throughout
//! ([`distributions`]), an ε-drawdown extractor for intraday price series
//! ([`drawdowns`]), and a seeded simulation harness for power, masking /
//! swamping, sequential-comparison, and misspecification studies
//! ([`studies`]).
//!
//! Every randomized entry point takes either an explicit RNG stream or a
//! 64-bit seed, and parallel work derives one independent stream per task,
//! so all results are reproducible bit-for-bit regardless of thread count.

pub mod calibration;
pub mod distributions;
pub mod drawdowns;
mod error;
pub mod mixture;
pub mod procedures;
pub mod rng;
pub mod sample;
pub mod statistics;
pub mod studies;

pub use error::{Error, Result};
pub use sample::OrderedSample;
pub use statistics::{StatisticKind, StatisticSpec};
