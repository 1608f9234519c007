//! Small event logs from large ones: load and clean process event logs,
//! split them into a frozen test set and a training set, shrink the training
//! set by a reduction factor, and score next-activity / next-role predictors
//! against one label registry.

pub mod error;
pub mod event_model;
pub mod experiment;
pub mod log_io;
pub mod metrics;
pub mod prediction;
pub mod rational;
pub mod reducer;
pub mod rng;
pub mod splitter;
pub mod stats;
pub mod synthetic;
pub mod variants;

pub use error::{Error, Result};
