#![cfg_attr(not(test), no_std)]
//! Core algorithms for detecting false-data-injection attacks on transformer
//! current differential relays.

extern crate alloc;

pub mod attack;
pub mod classifier;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod explainer;
pub mod math;
pub mod metrics;
pub mod nn;
pub mod relay;
pub mod scenario;
pub mod signal;
pub mod textualizer;
pub mod waveform;

pub use error::{Error, Result};
