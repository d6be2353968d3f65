//! Command-line surface of the contactotherm engine: builtin and file
//! models, reparametrization files, verification sweeps and reports.

pub mod cli;
pub mod commands;
pub mod model;
pub mod parallel;
pub mod reparam_spec;
pub mod report;

pub use cli::{run, EXIT_ERROR, EXIT_OK, EXIT_VERIFICATION_FAILED};
