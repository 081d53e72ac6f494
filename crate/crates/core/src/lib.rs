//! Adaptive transfer learning for domain-varying coefficient models.
//!
//! The coefficients of a (generalized) linear model vary smoothly with a
//! scalar domain identifier `u`. To estimate them at a target identifier
//! `u0` the crate combines
//!
//! 1. a pooled kernel-weighted local-polynomial fit over all domains
//!    ([`estimators::fit_dvcm`]),
//! 2. a data-driven shrinkage matrix built from the pilot's estimated bias
//!    and variance ([`penalty::estimate_q`]), and
//! 3. a ridge-type fine-tuning step on target data that shrinks towards the
//!    pilot ([`estimators::fit_tl`]).
//!
//! [`inference`] provides the covariance of the resulting estimator with
//! Wald tests and confidence intervals, [`bandwidth`] the bandwidth rules,
//! [`simulation`] a reproducible Monte-Carlo harness, and [`dataio`] the CSV
//! preprocessing pipeline. [`cli`] wires everything into end-to-end commands.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandwidth;
pub mod cli;
pub mod dataio;
pub mod design;
pub mod error;
pub mod estimators;
pub mod family;
pub mod inference;
pub mod linalg;
pub mod penalty;
pub mod pipeline;
pub mod simulation;
pub mod stats;

pub use design::{DomainSample, LocalDesign};
pub use error::{DvcmError, Result};
pub use estimators::{LocalFit, TlFit};
pub use family::Family;
