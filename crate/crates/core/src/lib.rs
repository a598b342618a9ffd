//! Kernel ridge regression under time-varying sampling distributions.
//!
//! The crate covers the full pipeline: kernels and Gram matrices, densities
//! and sampling schedules, kernel integral operators with their smoothness
//! diagnostics, the streaming ridge estimator, and a Monte Carlo experiment
//! harness with CSV/JSON reporting.

pub mod cli;
pub mod config;
pub mod densities;
pub mod error;
pub mod experiment;
pub mod kernels;
pub mod krr;
pub mod operator;
pub mod report;
pub mod special;

pub use error::{Error, Result};
