//! Correlation-network analytics for stock price panels.
//!
//! The crate covers the whole chain: loading and windowing closing-price
//! panels, per-window log-return correlation matrices, threshold-filtered
//! stock graphs, node and global network measures, Granger causality tests
//! between network properties and the market return, and return forecasting
//! with and without network features.

pub mod causality;
pub mod dist;
pub mod error;
pub mod features;
pub mod graph;
pub mod ingest;
mod linalg;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod returns;
pub mod scoring;

pub use error::{Error, Result};
