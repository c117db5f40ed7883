//! Heston model parameters and the constants derived from them.
//!
//! ```text
//! dR_t = mu dt + sqrt(V_t) dZ_t
//! dV_t = kappa (theta - V_t) dt + gamma sqrt(V_t) dB_t,   E[dZ dB] = beta dt
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the joint return / variance SDE system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    /// Mean-reversion speed (1/time).
    pub kappa: f64,
    /// Long-run mean of the variance.
    pub theta: f64,
    /// Volatility of variance.
    pub gamma: f64,
    /// Return drift (1/time).
    pub mu: f64,
    /// Correlation between the return and variance noises.
    pub beta: f64,
}

/// Constants derived from `(kappa, theta, gamma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// `2 kappa theta / gamma^2 - 1`, the order of the Bessel function in the transition law.
    pub r: f64,
    /// `2 kappa / gamma^2`, the rate of the stationary Gamma law.
    pub lambda: f64,
    /// Degrees of freedom `2r + 2` of the rescaled non-central chi-squared law.
    pub dfr: f64,
    kappa: f64,
}

impl DerivedConstants {
    /// `e^{-kappa T}`.
    pub fn nu(&self, t: f64) -> f64 {
        (-self.kappa * t).exp()
    }

    /// `Lambda / (1 - nu_T)`, defined for `T > 0` only.
    pub fn lambda_t(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("lambda_T needs T > 0, got {t}")));
        }
        // -expm1(-x) keeps precision when kappa*T is tiny
        Ok(self.lambda / -(-self.kappa * t).exp_m1())
    }
}

impl HestonParams {
    /// Validates the parameters, rejecting non-positive `kappa`, `theta`, `gamma`,
    /// `|beta| >= 1` and Feller violations.
    pub fn new(kappa: f64, theta: f64, gamma: f64, mu: f64, beta: f64) -> Result<Self> {
        for (name, v) in [
            ("kappa", kappa),
            ("theta", theta),
            ("gamma", gamma),
            ("mu", mu),
            ("beta", beta),
        ] {
            if !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be finite, got {v}")));
            }
        }
        if kappa <= 0.0 || theta <= 0.0 || gamma <= 0.0 {
            return Err(Error::Domain(format!(
                "kappa, theta, gamma must be positive (got {kappa}, {theta}, {gamma})"
            )));
        }
        if beta.abs() >= 1.0 {
            return Err(Error::Domain(format!("beta must lie in (-1, 1), got {beta}")));
        }
        let ratio = kappa * theta / (gamma * gamma);
        if ratio <= 0.5 {
            return Err(Error::FellerViolation { ratio });
        }
        Ok(Self { kappa, theta, gamma, mu, beta })
    }

    /// Builds parameters without any validation. Only meant for degenerate test
    /// fixtures such as `gamma = 0`.
    pub fn unchecked(kappa: f64, theta: f64, gamma: f64, mu: f64, beta: f64) -> Self {
        Self { kappa, theta, gamma, mu, beta }
    }

    /// Re-runs validation, e.g. after deserialization.
    pub fn validated(self) -> Result<Self> {
        Self::new(self.kappa, self.theta, self.gamma, self.mu, self.beta)
    }

    /// `2 kappa theta / gamma^2`; the Feller condition holds when this exceeds 1.
    pub fn feller_ratio(&self) -> f64 {
        2.0 * self.kappa * self.theta / (self.gamma * self.gamma)
    }

    pub fn derived(&self) -> DerivedConstants {
        let g2 = self.gamma * self.gamma;
        let r = 2.0 * self.kappa * self.theta / g2 - 1.0;
        DerivedConstants {
            r,
            lambda: 2.0 * self.kappa / g2,
            dfr: 2.0 * r + 2.0,
            kappa: self.kappa,
        }
    }

    pub fn with_beta(self, beta: f64) -> Result<Self> {
        Self::new(self.kappa, self.theta, self.gamma, self.mu, beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_parameters_are_valid() {
        let p = HestonParams::new(1.7, 4.0, 2.0, 0.05, 0.0).unwrap();
        assert!((p.feller_ratio() - 3.4).abs() < 1e-12);
        let d = p.derived();
        assert!((d.r - 2.4).abs() < 1e-12);
        assert!((d.lambda - 0.85).abs() < 1e-12);
        assert!((d.dfr - 2.0 * p.theta * d.lambda).abs() < 1e-12);
    }

    #[test]
    fn feller_boundary_is_rejected() {
        assert!(matches!(
            HestonParams::new(1.0, 1.0, 2.0, 0.0, 0.0),
            Err(Error::FellerViolation { .. })
        ));
        // exactly kappa*theta/gamma^2 = 1/2
        assert!(matches!(
            HestonParams::new(1.0, 2.0, 2.0, 0.0, 0.0),
            Err(Error::FellerViolation { .. })
        ));
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(HestonParams::new(1.7, 4.0, 2.0, 0.05, 1.0), Err(Error::Domain(_))));
        assert!(matches!(HestonParams::new(1.7, 4.0, 2.0, 0.05, -1.0), Err(Error::Domain(_))));
        assert!(matches!(HestonParams::new(0.0, 4.0, 2.0, 0.05, 0.0), Err(Error::Domain(_))));
        assert!(matches!(HestonParams::new(1.7, -4.0, 2.0, 0.05, 0.0), Err(Error::Domain(_))));
        assert!(matches!(HestonParams::new(1.7, 4.0, f64::NAN, 0.05, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn lambda_t_requires_positive_time() {
        let d = HestonParams::new(1.7, 4.0, 2.0, 0.05, 0.0).unwrap().derived();
        assert!(d.lambda_t(0.0).is_err());
        assert_eq!(d.nu(0.0), 1.0);
        let l = d.lambda_t(1.0).unwrap();
        assert!((l - 0.85 / (1.0 - (-1.7f64).exp())).abs() < 1e-12);
    }
}
