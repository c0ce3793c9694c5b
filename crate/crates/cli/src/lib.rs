//! File formats, reports and the end-to-end pipeline behind the `cvqrng`
//! command.
//!
//! The numerical work is done by [`cvqrng_core`]; this crate adds raw
//! sample ingestion ([`rawio`]), TOML configuration ([`config`]), JSON and
//! CSV reports ([`report`]), statistical sanity tests on output bits
//! ([`sanity`]), reproduction grids ([`sweep`]) and a self-test suite.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod rawio;
pub mod report;
pub mod sanity;
pub mod selftest;
pub mod sweep;

pub use config::PipelineConfig;
pub use error::{CliError, Result};
