//! Extended Kalman filter parameter estimation with iterative tuning of the
//! filter statistics (initial covariance, process and measurement noise).
//!
//! The crate is `no_std` and only needs an allocator. IO, Monte-Carlo
//! studies and the command line live in the `kftune` crate.

#![no_std]

extern crate alloc;

pub mod costs;
mod error;
pub mod filter;
pub mod models;
pub mod numerics;
pub mod oracle;
pub mod tuning;

pub use error::Error;
pub use numerics::{Mat, SeededRng, Vector};

pub type Result<T> = core::result::Result<T, Error>;
