//! File formats, result storage, plots, timing and the command-line front end
//! around `tcdr-core`.

pub mod bundle;
pub mod cli;
pub mod config;
pub mod error;
pub mod heatmap;
pub mod io;
pub mod latency;
pub mod store;

pub use error::{Error, Result};
