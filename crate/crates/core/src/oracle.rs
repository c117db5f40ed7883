//! Quadrature cross-checks of the closed-form densities and moments.
//!
//! These are slow compared to the closed forms and exist to validate them.

use std::cell::RefCell;

use crate::density::{ncchi2_density, stationary_density, transition_density};
use crate::error::Result;
use crate::moments::{conditional_mean, conditional_second_moment, stationary_moments};
use crate::params::HestonParams;
use crate::quadrature::{integrate_with_breaks, Tolerance};

fn tolerance() -> Tolerance {
    Tolerance { abs: 0.0, rel: 1e-12, max_intervals: 20_000 }
}

/// Breakpoints at `mean + k sd` for `k` in `-6..=6`, clipped to the positive axis.
fn breaks_around(mean: f64, sd: f64) -> Vec<f64> {
    (-6..=6).map(|k| mean + k as f64 * sd).filter(|&p| p > 0.0).collect()
}

/// `int_0^inf x^q f(x) dx` on `(0, upper)`.
fn moment_integral<F: Fn(f64) -> Result<f64>>(density: F, q: u32, upper: f64, breaks: &[f64]) -> Result<f64> {
    let failure = RefCell::new(None);
    let value = integrate_with_breaks(
        |x| match density(x) {
            Ok(p) => p * x.powi(q as i32),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        0.0,
        upper,
        breaks,
        tolerance(),
    );
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(value?.value),
    }
}

/// `E[V_T^q | V_0 = y]` by integrating the transition density.
pub fn transition_moment_by_quadrature(params: &HestonParams, y: f64, t: f64, q: u32) -> Result<f64> {
    let mean = conditional_mean(params, y, t);
    let sd = (conditional_second_moment(params, y, t) - mean * mean).max(0.0).sqrt();
    let lam = params.derived().lambda_t(t)?;
    // the upper tail decays like exp(-lambda_T z) times a power of z
    let upper = mean + 20.0 * sd + (60.0 + 8.0 * q as f64) / lam;
    moment_integral(|z| transition_density(params, z, y, t), q, upper, &breaks_around(mean, sd))
}

/// Raw moment of a non-central chi-squared law by integrating its density.
pub fn ncchi2_moment_by_quadrature(q: u32, dfr: f64, ncp: f64) -> Result<f64> {
    let mean = dfr + ncp;
    let sd = (2.0 * (dfr + 2.0 * ncp)).sqrt();
    let upper = mean + 20.0 * sd + 120.0 + 16.0 * q as f64;
    moment_integral(|x| Ok(ncchi2_density(x, dfr, ncp)), q, upper, &breaks_around(mean, sd))
}

/// Mass and mean of the stationary density.
pub fn stationary_mass_and_mean(params: &HestonParams) -> Result<(f64, f64)> {
    let s = stationary_moments(params);
    let sd = s.variance().sqrt();
    let upper = s.m1 + 20.0 * sd + 68.0 / params.derived().lambda;
    let breaks = breaks_around(s.m1, sd);
    let mass = moment_integral(|z| stationary_density(params, z), 0, upper, &breaks)?;
    let mean = moment_integral(|z| stationary_density(params, z), 1, upper, &breaks)?;
    Ok((mass, mean))
}
