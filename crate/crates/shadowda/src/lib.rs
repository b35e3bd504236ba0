//! File formats, run-directory bookkeeping, a rayon executor and the
//! command-line pipeline around `shadowda-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod pool;
pub mod stages;
pub mod store;

pub use error::CliError;
