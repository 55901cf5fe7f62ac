//! Experiments, file formats and the command line on top of `noisebound-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod data;
pub mod error;
pub mod experiments;
pub mod io;
pub mod report;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{Error, Result};
pub use report::{ExperimentReport, ReportRow, Summary};
