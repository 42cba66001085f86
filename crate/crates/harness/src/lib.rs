//! Command-line laboratory around the `d3rqn` crate: configuration files,
//! training runs, evaluation campaigns and SVG/CSV reports.

pub mod config;
pub mod error;
pub mod eval;
pub mod report;
pub mod svg;
pub mod train;

pub use config::{load_config, RunConfig};
pub use error::{HResult, HarnessError};
pub use eval::{cmd_eval, evaluate, EvalReport, Policy};
pub use report::cmd_report;
pub use train::cmd_train;
