//! Closed-form identities checked against quadrature, without simulation.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::moments::{conditional_moment_q, ncchi2_moment, params_from_moments, stationary_moments};
use crate::oracle::{ncchi2_moment_by_quadrature, stationary_mass_and_mean, transition_moment_by_quadrature};
use crate::params::HestonParams;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    /// Relative tolerance; `None` for inequality checks.
    pub tolerance: Option<f64>,
    pub pass: bool,
}

fn rel(name: String, value: f64, expected: f64, tolerance: f64) -> Check {
    let pass = (value - expected).abs() <= tolerance * expected.abs().max(f64::MIN_POSITIVE);
    Check { name, value, expected, tolerance: Some(tolerance), pass }
}

pub fn analytic_checks(params: &HestonParams) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let ratio = params.feller_ratio();
    out.push(Check { name: "feller_ratio".into(), value: ratio, expected: 1.0, tolerance: None, pass: ratio > 1.0 });

    let (mass, mean) = stationary_mass_and_mean(params)?;
    out.push(rel("stationary_mass".into(), mass, 1.0, 1e-9));
    out.push(rel("stationary_mean".into(), mean, params.theta, 1e-9));

    let theta = params.theta;
    for &(y, t) in &[(theta, 1.0), (0.5 * theta, 0.1), (2.0 * theta, 2.0)] {
        for q in 1..=4 {
            let quad = transition_moment_by_quadrature(params, y, t, q)?;
            let closed = conditional_moment_q(params, y, t, q)?;
            out.push(rel(format!("transition_moment(q={q},y={y},T={t})"), quad, closed, 1e-6));
        }
    }

    let d = params.derived();
    let lam2 = 2.0 * d.lambda_t(1.0)?;
    let ncp = lam2 * theta * d.nu(1.0);
    for q in 1..=6 {
        let quad = ncchi2_moment_by_quadrature(q, d.dfr, ncp)?;
        let closed = ncchi2_moment(q, d.dfr, ncp)?;
        out.push(rel(format!("ncchi2_moment(q={q})"), quad, closed, 1e-8));
    }

    let s = stationary_moments(params);
    let u = 0.6;
    let v = params_from_moments(s.m1, s.covariance(0.0), s.covariance(u), u)?;
    out.push(rel("round_trip_kappa".into(), v.kappa, params.kappa, 1e-12));
    out.push(rel("round_trip_theta".into(), v.theta, params.theta, 1e-12));
    out.push(rel("round_trip_gamma".into(), v.gamma, params.gamma, 1e-12));

    Ok(out)
}

pub const CHECK_HEADER: &str = "beta,check,value,expected,tolerance,pass";

pub fn write_checks<W: Write>(beta: f64, checks: &[Check], mut out: W) -> Result<()> {
    for c in checks {
        let tol = c.tolerance.map(|t| t.to_string()).unwrap_or_default();
        writeln!(out, "{},\"{}\",{},{},{},{}", beta, c.name, c.value, c.expected, tol, c.pass)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_parameters_pass_every_check() {
        let p = HestonParams::new(1.7, 4.0, 2.0, 0.05, 0.0).unwrap();
        let checks = analytic_checks(&p).unwrap();
        assert!((checks[0].value - 3.4).abs() < 1e-12);
        for c in &checks {
            assert!(c.pass, "{c:?}");
        }
    }
}
