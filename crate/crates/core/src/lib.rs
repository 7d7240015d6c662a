//! Batch-mode pool-based active learning with offline stopping-criterion
//! evaluation and cost-based criterion selection.
//!
//! The crate is organized around recorded run traces: the active-learning
//! loop executes once per (dataset, model, split) and every stopping
//! criterion is evaluated afterwards on the shared trace, so queried points
//! and classifiers are identical across criteria. A cost model over label
//! price, misclassification price, and model lifetime then ranks criteria
//! for a concrete deployment scenario.

pub mod cost;
pub mod criteria;
pub mod data;
pub mod error;
pub mod harness;
pub mod learners;
pub mod query;
pub mod stats;
pub mod svg;

pub use error::{Error, Result};
