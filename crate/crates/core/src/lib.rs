//! Distances of positive interarrival-time samples to the exponential class.
//!
//! The crate estimates the Kolmogorov, Wasserstein and Zolotarev distances of
//! an empirical distribution to the exponential law with the same mean,
//! simulates the asymptotic laws of the estimators, runs goodness-of-fit
//! tests for exponentiality, and turns per-source event lists into
//! classification features.

pub mod asymptotics;
pub mod classify;
pub mod cli;
pub mod distributions;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod rng;
pub mod sample;
pub mod simstudy;
pub mod stats;

pub use distributions::{DistKind, RefDistribution};
pub use error::{Error, Result};
pub use metrics::{DistanceEstimate, DistanceSet, Metric};
pub use sample::PitSample;
