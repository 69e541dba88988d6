//! Randomized-start inverse first-passage problems for Brownian motion.
//!
//! Given a law for the first time `X_t = ξ + W_t` falls below the line `kt`,
//! [`gsp`] finds the law of the random start `ξ`; [`simulate`] draws exact
//! `(ξ, τ)` pairs and evaluates a quadrature oracle for the hitting-time CDF;
//! [`skorohod`] stops Brownian motion on a two-sided wedge to embed a signed
//! target law; [`verify`] holds the statistical and analytic checks.

// `!(x > 0.0)` guards are written to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod error;
pub mod gsp;
pub mod quadrature;
pub mod rng;
pub mod simulate;
pub mod skorohod;
pub mod special;
pub mod verify;

pub use error::{Error, Result};
