//! Batch front end for the `ctrlopt` pricing engine: JSON run configs,
//! pricing reports, cross-method comparisons, convergence sweeps and
//! value/policy slice exports.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{MethodName, RunConfig};
pub use error::CliError;
