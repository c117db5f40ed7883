//! Empirical moments of realized-volatility series and the moment-based
//! estimators of `(kappa, theta, gamma)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::params_from_moments;
use crate::realized::RealizedSeries;

/// Nearest integer to `u / delta`, ties rounded up.
pub fn lag_index(u: f64, delta: f64) -> usize {
    debug_assert!(u >= 0.0 && delta > 0.0);
    (u / delta + 0.5).floor() as usize
}

/// Empirical lagged covariance at one requested lag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagMoment {
    pub requested_u: f64,
    pub index: usize,
    /// `index * delta`
    pub realized_u: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimates {
    pub m_hat: f64,
    pub k_hat: Vec<LagMoment>,
    pub n_used: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub j: u64,
}

impl MomentEstimates {
    /// Entry for a requested lag.
    pub fn lag(&self, u: f64) -> Option<&LagMoment> {
        self.k_hat.iter().find(|m| (m.requested_u - u).abs() <= 1e-12 * u.max(1.0))
    }

    /// Entry at lag index zero.
    pub fn variance(&self) -> Option<&LagMoment> {
        self.k_hat.iter().find(|m| m.index == 0)
    }
}

/// `m = (1/N) sum W_k`, `K(u) = -m^2 + (1/(N-U)) sum_{k<=N-U} W_k W_{k+U}`.
///
/// Lag zero is always included.
pub fn empirical_moments(series: &RealizedSeries, lags: &[f64]) -> Result<MomentEstimates> {
    let w = &series.observations;
    let n = w.len();
    if n == 0 {
        return Err(Error::InsufficientData { n, lag: 0 });
    }
    let m_hat = w.iter().sum::<f64>() / n as f64;
    let mut requested: Vec<f64> = Vec::with_capacity(lags.len() + 1);
    if !lags.contains(&0.0) {
        requested.push(0.0);
    }
    requested.extend_from_slice(lags);

    let mut k_hat = Vec::with_capacity(requested.len());
    for &u in &requested {
        if !(u >= 0.0) {
            return Err(Error::Domain(format!("lag must be non-negative, got {u}")));
        }
        let index = lag_index(u, series.delta);
        if n <= index {
            return Err(Error::InsufficientData { n, lag: index });
        }
        let pairs = n - index;
        let cross: f64 = w[..pairs].iter().zip(&w[index..]).map(|(a, b)| a * b).sum();
        k_hat.push(LagMoment {
            requested_u: u,
            index,
            realized_u: index as f64 * series.delta,
            value: cross / pairs as f64 - m_hat * m_hat,
        });
    }
    Ok(MomentEstimates {
        m_hat,
        k_hat,
        n_used: n,
        epsilon: series.epsilon,
        delta: series.delta,
        j: series.j,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateDiagnostics {
    pub k0: f64,
    pub ku: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub theta: f64,
    pub kappa: f64,
    pub gamma: f64,
    /// Realized lag `U * Delta` used in the kappa formula.
    pub lag_u: f64,
    pub diagnostics: EstimateDiagnostics,
}

/// Inverts empirical moments at lags `0` and `u` into parameter estimates.
pub fn estimate_params(moments: &MomentEstimates, u: f64) -> Result<ParamEstimate> {
    let k0 = moments
        .variance()
        .ok_or_else(|| Error::Domain("moment estimates lack lag 0".into()))?
        .value;
    let lag = moments
        .lag(u)
        .ok_or_else(|| Error::Domain(format!("moment estimates lack lag {u}")))?;
    let ku = lag.value;
    let diagnostics = EstimateDiagnostics { k0, ku, ratio: ku / k0 };
    if !(moments.m_hat > 0.0) {
        return Err(Error::EstimationDegenerate(format!("empirical mean {} is not positive", moments.m_hat)));
    }
    if !(k0 > 0.0) || !(ku > 0.0) || !(ku < k0) {
        return Err(Error::EstimationDegenerate(format!(
            "need 0 < K(u) < K(0), got K(0) = {k0}, K({}) = {ku}",
            lag.realized_u
        )));
    }
    if lag.index == 0 {
        return Err(Error::EstimationDegenerate(format!("lag {u} rounds to zero sampling steps")));
    }
    let v = params_from_moments(moments.m_hat, k0, ku, lag.realized_u)
        .map_err(|e| Error::EstimationDegenerate(e.to_string()))?;
    Ok(ParamEstimate {
        theta: v.theta,
        kappa: v.kappa,
        gamma: v.gamma,
        lag_u: lag.realized_u,
        diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagQuality {
    pub pass: bool,
    /// `exp(-kappa_hat * u)`
    pub correlation: f64,
}

/// A-posteriori check that the lag sits where the correlation is informative.
pub fn lag_quality_check(estimate: &ParamEstimate) -> LagQuality {
    let correlation = (-estimate.kappa * estimate.lag_u).exp();
    LagQuality { pass: (0.3..=0.7).contains(&correlation), correlation }
}

/// One exported row per replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub replicate: u64,
    pub epsilon: f64,
    pub theta_hat: Option<f64>,
    pub kappa_hat: Option<f64>,
    pub gamma_hat: Option<f64>,
    pub m_hat: f64,
    pub k0_hat: f64,
    pub ku_hat: f64,
    pub realized_u: f64,
    pub degenerate: bool,
}

impl EstimateRow {
    pub fn new(replicate: u64, moments: &MomentEstimates, u: f64, estimate: Option<&ParamEstimate>) -> Self {
        let lag = moments.lag(u);
        Self {
            replicate,
            epsilon: moments.epsilon,
            theta_hat: estimate.map(|e| e.theta),
            kappa_hat: estimate.map(|e| e.kappa),
            gamma_hat: estimate.map(|e| e.gamma),
            m_hat: moments.m_hat,
            k0_hat: moments.variance().map_or(f64::NAN, |m| m.value),
            ku_hat: lag.map_or(f64::NAN, |m| m.value),
            realized_u: lag.map_or(f64::NAN, |m| m.realized_u),
            degenerate: estimate.is_none(),
        }
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_estimates_csv<W: Write>(rows: &[EstimateRow], mut out: W) -> Result<()> {
    writeln!(out, "replicate,epsilon,theta_hat,kappa_hat,gamma_hat,m_hat,k0_hat,ku_hat,realized_u,degenerate")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.replicate,
            r.epsilon,
            opt(r.theta_hat),
            opt(r.kappa_hat),
            opt(r.gamma_hat),
            r.m_hat,
            r.k0_hat,
            r.ku_hat,
            r.realized_u,
            r.degenerate
        )?;
    }
    Ok(())
}
