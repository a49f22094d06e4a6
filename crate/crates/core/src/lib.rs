//! Answering adaptively chosen statistical queries with Gaussian noise
//! scaled to each query's empirical variance.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: datasets, statistical queries, empirical and leave-one-out
//!   statistics, scaled errors.
//! - [`divergence`]: closed-form KL divergences (Gaussian, Laplace,
//!   Bernoulli, finite) and the expectation bounds built on them.
//! - [`mechanism`]: the variance-calibrated Gaussian mechanism, baselines,
//!   and the analyst/mechanism interaction loop.
//! - [`stability`]: the average leave-one-out KL ledger and the
//!   generalization bound calculators.
//! - [`analyst`]: bit-vector domains with closed-form truth, adaptive
//!   analysts, and the worst-query monitor.
//! - [`oracle`]: exact enumeration over tiny discrete mechanisms.
//! - [`harness`]: seeded Monte Carlo experiments and CSV/JSON reports.

pub mod analyst;
pub mod data;
pub mod divergence;
pub mod error;
pub mod harness;
pub mod mechanism;
pub mod oracle;
pub mod stability;

pub use error::{Error, Result};
