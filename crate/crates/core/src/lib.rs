//! Growing networks from time-varying mixtures of attachment mechanisms, and
//! inferring from an observed edge-arrival stream which mixture, possibly
//! changing over time, most likely produced it.

pub mod error;
pub mod estimation;
pub mod generator;
pub mod graph;
pub mod likelihood;
pub mod model;
pub mod netstats;
mod sampler;
pub mod spec;
pub mod stream;

pub use error::{Error, Result};
pub use graph::{DynamicGraph, Increment, NodeIdx, NodeRef};
pub use model::{Component, MixtureInterval, ModelSchedule};
