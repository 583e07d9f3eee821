//! Command-line driver for `rotsym-core`: jobs, sweeps, figure data and
//! reproducible run manifests.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod figures;
pub mod format;
pub mod jobs;
pub mod manifest;
pub mod output;
pub mod sweep;

pub use error::{CliError, CliResult};
pub use jobs::{execute, ExecContext, Job};
