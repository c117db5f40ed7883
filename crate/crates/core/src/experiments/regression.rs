//! Ordinary least squares on `(log eps, log value)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute residual in log space.
    pub max_residual: f64,
}

pub fn slope_fit(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 2 {
        return Err(Error::Domain(format!("slope fit needs at least 2 points, got {}", points.len())));
    }
    if let Some(&(e, v)) = points.iter().find(|&&(e, v)| !(e > 0.0) || !(v > 0.0)) {
        return Err(Error::Domain(format!("log-log fit needs positive coordinates, got ({e}, {v})")));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("slope fit needs at least two distinct eps values".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok(SlopeFit { slope, intercept, max_residual })
}

/// Points used for a slope: with four or more grid values only `eps <= 0.05` is kept.
pub fn fit_subset(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() >= 4 {
        let small: Vec<_> = points.iter().copied().filter(|p| p.0 <= 0.05 + 1e-12).collect();
        if small.len() >= 2 {
            return small;
        }
    }
    points.to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = [0.1, 0.05, 0.02, 0.01].iter().map(|&e: &f64| (e, 3.0 * e.sqrt())).collect();
        let f = slope_fit(&pts).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.max_residual < 1e-12);
    }

    #[test]
    fn reference_row_slope() {
        // L^2 errors with J = 1/eps
        let pts = [(0.005, 0.45), (0.01, 0.64), (0.02, 0.90), (0.05, 1.39), (0.1, 1.94)];
        let f = slope_fit(&pts).unwrap();
        assert!((f.slope - 0.486_260_47).abs() < 1e-7, "{}", f.slope);
    }

    #[test]
    fn constant_values() {
        let f = slope_fit(&[(0.1, 2.0), (0.01, 2.0), (0.05, 2.0)]).unwrap();
        assert_eq!(f.slope, 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(slope_fit(&[(0.1, 1.0)]).is_err());
        assert!(slope_fit(&[(0.1, 1.0), (0.2, 0.0)]).is_err());
        assert!(slope_fit(&[(0.1, 1.0), (0.1, 2.0)]).is_err());
    }

    #[test]
    fn subset_rule() {
        let pts = [(0.1, 1.0), (0.05, 1.0), (0.02, 1.0), (0.01, 1.0)];
        assert_eq!(fit_subset(&pts).len(), 3);
        assert_eq!(fit_subset(&pts[..3]).len(), 3);
    }
}
