//! File formats, dataset directories and the command-line front end for
//! `omnipose-core`.
//!
//! Everything that touches the file system lives here; the core crate stays
//! `no_std`. See `configs/default.toml` for the configuration schema.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod formats;
pub mod report;

pub use error::{Error, Result};
