//! File formats, reports, the synthetic benchmark and the command line for
//! row-type dependent predictive analysis. The algorithms live in
//! `rtdpa-core`.

pub mod cli;
pub mod error;
pub mod io;
pub mod model_file;
pub mod report;
pub mod synth;

pub use error::{AppError, AppResult};
