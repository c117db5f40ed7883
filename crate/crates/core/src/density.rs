//! Transition and stationary densities of the variance process, composed in log space.

use crate::error::{Error, Result};
use crate::params::HestonParams;
use crate::special::{ln_bessel_i_scaled, ln_gamma};

/// `ln p(z, y)` for the variance transition `V_T = z | V_0 = y`.
pub fn ln_transition_density(params: &HestonParams, z: f64, y: f64, t: f64) -> Result<f64> {
    if !(z > 0.0 && y > 0.0 && t > 0.0) {
        return Err(Error::Domain(format!(
            "transition density needs z, y, T > 0 (got z={z}, y={y}, T={t})"
        )));
    }
    let d = params.derived();
    let lam = d.lambda_t(t)?;
    let ync = y * d.nu(t);
    let arg = 2.0 * lam * (z * ync).sqrt();
    // -lam (z + y nu) + arg = -lam (sqrt z - sqrt(y nu))^2, exact cancellation of the e^arg growth
    let gap = z.sqrt() - ync.sqrt();
    Ok(lam.ln() + 0.5 * d.r * (z.ln() - ync.ln()) - lam * gap * gap + ln_bessel_i_scaled(d.r, arg))
}

/// Transition density `p(z, y)`; extreme tails underflow to exactly zero.
pub fn transition_density(params: &HestonParams, z: f64, y: f64, t: f64) -> Result<f64> {
    Ok(ln_transition_density(params, z, y, t)?.exp())
}

/// `ln psi(z)`, the stationary Gamma density with shape `r + 1` and rate `Lambda`.
pub fn ln_stationary_density(params: &HestonParams, z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("stationary density needs z > 0, got {z}")));
    }
    let d = params.derived();
    Ok(d.lambda.ln() + d.r * (d.lambda * z).ln() - d.lambda * z - ln_gamma(d.r + 1.0))
}

pub fn stationary_density(params: &HestonParams, z: f64) -> Result<f64> {
    Ok(ln_stationary_density(params, z)?.exp())
}

/// Non-central chi-squared density with `dfr` degrees of freedom and non-centrality `ncp`.
pub fn ncchi2_density(x: f64, dfr: f64, ncp: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let half_k = 0.5 * dfr;
    if ncp == 0.0 {
        let ln = (half_k - 1.0) * x.ln() - 0.5 * x - half_k * std::f64::consts::LN_2 - ln_gamma(half_k);
        return ln.exp();
    }
    let arg = (ncp * x).sqrt();
    let gap = x.sqrt() - ncp.sqrt();
    let ln = -std::f64::consts::LN_2 - 0.5 * gap * gap
        + (0.25 * dfr - 0.5) * (x.ln() - ncp.ln())
        + ln_bessel_i_scaled(half_k - 1.0, arg);
    ln.exp()
}
