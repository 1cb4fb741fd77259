//! Monte-Carlo studies, dataset and report files, and helpers behind the
//! `kftune` command line.

pub mod config;
pub mod demo;
mod error;
pub mod io;
pub mod metrics;
pub mod report;
pub mod study;
pub mod summary;

pub use error::{HarnessError, Result};
pub use metrics::MetricsTable;
pub use study::{monte_carlo, Archive, Method, Regime, StudyConfig, StudyOutput};
