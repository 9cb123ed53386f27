//! Approximate aggregation queries over tuple bubbles: partitions of
//! relations summarized by Chow-Liu Bayesian networks.

pub mod bench;
pub mod catalog;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod inference;
pub mod model;
pub mod network;
pub mod partitioner;
pub mod sql;
pub mod synth;

pub use error::{Error, Result};
