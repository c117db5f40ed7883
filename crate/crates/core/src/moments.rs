//! Closed-form conditional and stationary moments of the variance process,
//! non-central chi-squared moments, and the moment-to-parameter map.

use crate::error::{Error, Result};
use crate::params::HestonParams;

/// Order-`q` raw moment of a non-central chi-squared law.
///
/// Cumulants are `c_n = 2^{n-1} (n-1)! (dfr + n ncp)`; raw moments follow from
/// `m_n = sum_{j=0}^{n-1} C(n-1, j) c_{j+1} m_{n-1-j}`.
pub fn ncchi2_moment(q: u32, dfr: f64, ncp: f64) -> Result<f64> {
    if q == 0 {
        return Err(Error::Domain("moment order must be at least 1".into()));
    }
    if !(dfr > 0.0) || !(ncp >= 0.0) {
        return Err(Error::Domain(format!(
            "need dfr > 0 and ncp >= 0 (got dfr={dfr}, ncp={ncp})"
        )));
    }
    let q = q as usize;
    let mut cumulants = Vec::with_capacity(q);
    // 2^{n-1} (n-1)! built incrementally
    let mut scale = 1.0f64;
    for n in 1..=q {
        if n > 1 {
            scale *= 2.0 * (n - 1) as f64;
        }
        cumulants.push(scale * (dfr + n as f64 * ncp));
    }
    let mut raw = vec![1.0f64; q + 1];
    for n in 1..=q {
        // binomial C(n-1, j) rolled along j
        let mut binom = 1.0f64;
        let mut acc = 0.0f64;
        for j in 0..n {
            if j > 0 {
                binom *= (n - j) as f64 / j as f64;
            }
            acc += binom * cumulants[j] * raw[n - 1 - j];
        }
        raw[n] = acc;
    }
    let m = raw[q];
    if !m.is_finite() {
        return Err(Error::Overflow(format!("order-{q} chi-squared moment exceeds f64 range")));
    }
    Ok(m)
}

/// `E[V_T | V_0 = y] = (1 - nu_T) theta + nu_T y`.
pub fn conditional_mean(params: &HestonParams, y: f64, t: f64) -> f64 {
    let nu = params.derived().nu(t);
    (1.0 - nu) * params.theta + nu * y
}

/// `E[V_T^2 | V_0 = y]`.
pub fn conditional_second_moment(params: &HestonParams, y: f64, t: f64) -> f64 {
    let d = params.derived();
    let nu = d.nu(t);
    let one_m = -(-params.kappa * t).exp_m1();
    let c = params.theta + 1.0 / d.lambda;
    y * y * nu * nu + 2.0 * y * nu * one_m * c + one_m * one_m * params.theta * c
}

/// `E[V_T^q | V_0 = y] = (2 lambda_T)^{-q} pi_q(2 lambda_T y nu_T)`.
pub fn conditional_moment_q(params: &HestonParams, y: f64, t: f64, q: u32) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::Domain(format!("initial variance must be positive, got {y}")));
    }
    let d = params.derived();
    let lam2 = 2.0 * d.lambda_t(t)?;
    let raw = ncchi2_moment(q, d.dfr, lam2 * y * d.nu(t))?;
    let m = raw / lam2.powi(q as i32);
    if !m.is_finite() {
        return Err(Error::Overflow(format!("order-{q} conditional moment exceeds f64 range")));
    }
    Ok(m)
}

/// Mean, second moment and lagged covariance of the stationary variance process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryMoments {
    pub m1: f64,
    pub m2: f64,
    kappa: f64,
}

impl StationaryMoments {
    /// `K(u) = K(0) e^{-kappa u}`.
    pub fn covariance(&self, u: f64) -> f64 {
        self.variance() * (-self.kappa * u).exp()
    }

    /// `K(0) = m2 - m1^2`.
    pub fn variance(&self) -> f64 {
        self.m2 - self.m1 * self.m1
    }
}

pub fn stationary_moments(params: &HestonParams) -> StationaryMoments {
    let theta = params.theta;
    let lambda = params.derived().lambda;
    StationaryMoments { m1: theta, m2: theta * theta + theta / lambda, kappa: params.kappa }
}

/// `(kappa, theta, gamma)` recovered by inverting the stationary moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolParams {
    pub kappa: f64,
    pub theta: f64,
    pub gamma: f64,
}

/// Inverts `(m1, K(0), K(u))` into `(kappa, theta, gamma)`.
pub fn params_from_moments(m1: f64, k0: f64, ku: f64, u: f64) -> Result<VolParams> {
    if !(m1 > 0.0) {
        return Err(Error::Domain(format!("mean must be positive, got {m1}")));
    }
    if !(u > 0.0) {
        return Err(Error::Domain(format!("lag must be positive, got {u}")));
    }
    if !(k0 > 0.0) || !(ku > 0.0) || !(ku < k0) {
        return Err(Error::Domain(format!("need 0 < K(u) < K(0), got K(0)={k0}, K(u)={ku}")));
    }
    let kappa = -(ku / k0).ln() / u;
    let gamma = (2.0 * k0 * kappa / m1).sqrt();
    Ok(VolParams { kappa, theta: m1, gamma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference() -> HestonParams {
        HestonParams::new(1.7, 4.0, 2.0, 0.05, 0.0).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn ncchi2_low_orders() {
        assert_eq!(ncchi2_moment(1, 3.0, 1.5).unwrap(), 4.5);
        assert_eq!(ncchi2_moment(2, 2.0, 0.0).unwrap(), 8.0);
        let (k, l) = (3.0, 1.5);
        let m2 = l * l + 2.0 * l * (k + 2.0) + k * k + 2.0 * k;
        assert!(rel(ncchi2_moment(2, k, l).unwrap(), m2) < 1e-15);
        assert!(ncchi2_moment(0, 2.0, 0.0).is_err());
    }

    #[test]
    fn ncchi2_overflow_is_reported() {
        assert!(matches!(ncchi2_moment(400, 6.8, 10.0), Err(Error::Overflow(_))));
    }

    #[test]
    fn conditional_mean_examples() {
        let p = reference();
        assert_eq!(conditional_mean(&p, 4.0, 3.3), 4.0);
        assert_eq!(conditional_mean(&p, 2.0, 0.0), 2.0);
        // 4 - 2 e^{-1.7}
        assert!((conditional_mean(&p, 2.0, 1.0) - 3.634_632_951_894_530_6).abs() < 1e-12);
    }

    #[test]
    fn conditional_second_moment_limits() {
        let p = reference();
        assert!(rel(conditional_second_moment(&p, 3.0, 0.0), 9.0) < 1e-15);
        let m2 = stationary_moments(&p).m2;
        assert!(rel(conditional_second_moment(&p, 3.0, 60.0), m2) < 1e-14);
    }

    #[test]
    fn stationary_examples() {
        let p = reference();
        let s = stationary_moments(&p);
        assert_eq!(s.m1, 4.0);
        assert!((s.variance() - 16.0 / 3.4).abs() < 1e-12);
        for u in [0.1, 0.6, 2.0] {
            assert!(rel(s.covariance(u) / s.covariance(0.0), (-1.7 * u).exp()) < 1e-15);
        }
    }

    #[test]
    fn params_from_moments_examples() {
        let s = stationary_moments(&reference());
        let v = params_from_moments(s.m1, s.variance(), s.covariance(0.6), 0.6).unwrap();
        assert!(rel(v.kappa, 1.7) < 1e-12 && rel(v.theta, 4.0) < 1e-12 && rel(v.gamma, 2.0) < 1e-12);

        let k0 = 4.705882;
        let v = params_from_moments(4.0, k0, k0 * (-1.02f64).exp(), 0.6).unwrap();
        assert!(rel(v.kappa, 1.7) < 1e-12);

        assert!(params_from_moments(4.0, k0, k0, 0.6).is_err());
        assert!(params_from_moments(4.0, k0, -1.0, 0.6).is_err());
        assert!(params_from_moments(0.0, k0, 1.0, 0.6).is_err());
    }

    #[test]
    fn decay_of_conditional_mean_is_exact() {
        let p = reference();
        for &(y, t) in &[(0.5, 0.1), (9.0, 1.0), (2.0, 5.0)] {
            let err = (conditional_mean(&p, y, t) - p.theta).abs();
            assert!((err - (-1.7 * t).exp() * (y - 4.0f64).abs()).abs() < 1e-12);
        }
    }

    fn valid_params() -> impl Strategy<Value = HestonParams> {
        (0.2f64..5.0, 0.5f64..8.0, 0.2f64..1.0).prop_map(|(kappa, theta, frac)| {
            // gamma^2 < 2 kappa theta keeps Feller strict
            let gamma = (frac * 1.9 * kappa * theta).sqrt();
            HestonParams::new(kappa, theta, gamma, 0.0, 0.0).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn general_order_matches_closed_forms(p in valid_params(), y in 0.01f64..20.0, t in 0.001f64..10.0) {
            let m1 = conditional_moment_q(&p, y, t, 1).unwrap();
            prop_assert!(rel(m1, conditional_mean(&p, y, t)) < 1e-12);
            let m2 = conditional_moment_q(&p, y, t, 2).unwrap();
            prop_assert!(rel(m2, conditional_second_moment(&p, y, t)) < 1e-12);
        }

        #[test]
        fn moment_map_inverts(p in valid_params(), u in 0.01f64..5.0) {
            let s = stationary_moments(&p);
            let v = params_from_moments(s.m1, s.variance(), s.covariance(u), u).unwrap();
            prop_assert!(rel(v.kappa, p.kappa) < 1e-12);
            prop_assert!(rel(v.theta, p.theta) < 1e-12);
            prop_assert!(rel(v.gamma, p.gamma) < 1e-12);
        }

        #[test]
        fn central_moments_are_rising_products(q in 1u32..12, dfr in 0.1f64..30.0) {
            let expected: f64 = (0..q).map(|i| dfr + 2.0 * i as f64).product();
            prop_assert!(rel(ncchi2_moment(q, dfr, 0.0).unwrap(), expected) < 1e-12);
        }

        #[test]
        fn conditional_mean_converges_monotonically(p in valid_params(), y in 0.01f64..20.0, t in 0.0f64..5.0, dt in 0.001f64..1.0) {
            let a = (conditional_mean(&p, y, t) - p.theta).abs();
            let b = (conditional_mean(&p, y, t + dt) - p.theta).abs();
            prop_assert!(b <= a);
        }
    }
}
