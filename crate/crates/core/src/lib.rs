//! Simulation and moment-based estimation for the Heston stochastic-volatility
//! model when the variance is only observed through realized volatilities.
//!
//! The crate is organised bottom-up:
//!
//! - [`params`], [`moments`], [`density`]: model parameters and closed-form
//!   analytic quantities (conditional/stationary moments, transition densities,
//!   the moment-to-parameter map).
//! - [`sim`]: reproducible full-truncation Euler simulation of `(R_t, V_t)`.
//! - [`realized`]: realized volatilities on sliding windows and the `J`, `N`,
//!   `Delta` rules.
//! - [`estimators`]: empirical moments and parameter estimates.
//! - [`experiments`]: Monte Carlo error studies and log-log slope fits.
//! - [`cli`]: configuration, presets and artifact output for the binary.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod density;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod moments;
pub mod oracle;
pub mod params;
pub mod quadrature;
pub mod realized;
pub mod sim;
pub mod special;

pub use error::{Error, Result};
pub use params::HestonParams;
