//! Two-sample k-coverage thresholds in bounded domains.
//!
//! `R_{n,m,k}` is the smallest radius such that every one of `m` target
//! points has at least `k` of `n` source points within that distance. This
//! crate samples it by Monte Carlo, evaluates its limiting and finite-n
//! corrected distributions, and computes the vacancy integrals behind them.

pub mod analytic;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod knn;
pub mod limits;
pub mod quad;
pub mod sampler;

pub use error::{Error, Result};
