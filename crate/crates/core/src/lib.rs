//! Task-free continual-learning streams built from static node-classification
//! graphs, with reference online learners and stream-level metrics.
//!
//! The pipeline runs dataset → [`graph::partition_tasks`] →
//! [`schedule::build_schedule`] → [`sampler::generate_stream`] →
//! learner → [`metrics`].

pub mod error;
pub mod graph;
pub mod learners;
pub mod metrics;
pub mod rng;
pub mod sampler;
pub mod schedule;
pub mod stream_io;

pub use error::{Error, ErrorKind, Result};
