//! HTTP API and command line for psm sessions. Both are thin adapters over
//! `psm-core`.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod http;
pub mod store;

pub use error::ApiError;
