//! Row-type dependent predictive analysis.
//!
//! Rows of a tabular dataset are partitioned by a designated row-type column;
//! every partition gets its own preprocessing, class rebalancing and
//! classifier, and new rows are routed to the model of their type.
//!
//! This crate holds the algorithmic core and needs only `alloc`. File
//! formats, CSV ingestion and the command line live in the `rtdpa` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod augmentation;
pub mod dataset;
pub mod decomposition;
mod error;
pub mod framework;
pub mod learners;
pub mod math;
pub mod matrix;
pub mod metrics;
pub mod neighbors;
pub mod preprocess;
pub mod rng;
pub mod tree;

pub use error::{Error, Result};
pub use matrix::Matrix;
