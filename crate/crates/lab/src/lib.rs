//! Experiment harness around `evorl-core`: run configuration, training
//! dispatch with learning-curve CSVs, checkpoints, post-evaluation,
//! replicated experiments and statistical comparisons.

pub mod agent;
pub mod compare;
pub mod config;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod posteval;
pub mod train;

pub use error::{LabError, Result};
