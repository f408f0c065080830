//! Bayesian decision framework for phase I dose-finding trials.
//!
//! Interval designs (mTPI, mTPI-2, BOIN, CCD) and the interval version of
//! the CRM (Int-CRM) are all expressed as the Bayes rule under a 0-1 loss
//! over a partition of the parameter space. The designs differ only in the
//! partition and in the conditional prior placed on each interval.
//!
//! Module map:
//!
//! - [`numerics`]: incomplete beta, adaptive Simpson, bisection, PAVA.
//! - [`framework`]: partitions, interval priors, model evidence, Bayes rule.
//! - [`designs`]: the concrete decision rules and the CRM / i3+3 benchmarks.
//! - [`trial`]: cohort-by-cohort trial engine with the safety rules.
//! - [`sim`]: scenarios, Monte Carlo replication, operating characteristics.
//! - [`tables`]: pre-tabulated decision tables and their text formats.
//! - [`verify`]: exhaustive equivalence checks between rules and Bayes rules.

pub mod designs;
pub mod error;
pub mod framework;
pub mod numerics;
pub mod sim;
pub mod tables;
pub mod trial;
pub mod verify;

pub use error::{Error, Result};
