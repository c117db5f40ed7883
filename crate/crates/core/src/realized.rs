//! Realized volatility on sliding windows and the partition / sub-sampling rules.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{PathBundle, TimeGrid};

/// Ceiling that ignores floating-point noise just above an integer.
pub(crate) fn ceil_tol(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

/// Partition size rule `J(eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JRule {
    Constant(u64),
    /// `ceil(1 / eps)`
    Inverse,
    /// `ceil(1 / eps^2)`
    InverseSquare,
}

impl JRule {
    pub fn resolve(&self, eps: f64) -> u64 {
        match *self {
            JRule::Constant(j) => j,
            JRule::Inverse => ceil_tol(1.0 / eps),
            JRule::InverseSquare => ceil_tol(1.0 / (eps * eps)),
        }
    }
}

impl fmt::Display for JRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JRule::Constant(j) => write!(f, "const:{j}"),
            JRule::Inverse => f.write_str("inverse"),
            JRule::InverseSquare => f.write_str("inverse-square"),
        }
    }
}

impl FromStr for JRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inverse" => Ok(JRule::Inverse),
            "inverse-square" => Ok(JRule::InverseSquare),
            other => {
                let n = other.strip_prefix("const:").unwrap_or(other);
                n.parse::<u64>()
                    .map(JRule::Constant)
                    .map_err(|_| Error::Config(format!("unknown J rule '{s}'")))
            }
        }
    }
}

impl Serialize for JRule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for JRule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Sub-sampling interval rule `Delta(eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaRule {
    SqrtEps,
    Constant(f64),
}

impl DeltaRule {
    pub fn resolve(&self, eps: f64) -> f64 {
        match *self {
            DeltaRule::SqrtEps => eps.sqrt(),
            DeltaRule::Constant(d) => d,
        }
    }
}

/// Window width plus the rules that fix `J`, `N` and `Delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowScheme {
    pub epsilon: f64,
    pub j_rule: JRule,
    /// `N(eps) = ceil(n_scale / eps)`.
    pub n_scale: f64,
    pub delta_rule: DeltaRule,
}

/// Integer `J`, `N` and real `Delta` for one window width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedScheme {
    pub epsilon: f64,
    pub j: u64,
    pub n: u64,
    pub delta: f64,
}

impl WindowScheme {
    pub fn new(epsilon: f64, j_rule: JRule, n_scale: f64, delta_rule: DeltaRule) -> Self {
        Self { epsilon, j_rule, n_scale, delta_rule }
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Self { epsilon, ..self }
    }
}

pub fn resolve_scheme(scheme: &WindowScheme) -> Result<ResolvedScheme> {
    let eps = scheme.epsilon;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Config(format!("window width must be positive, got {eps}")));
    }
    let j = scheme.j_rule.resolve(eps);
    if j < 2 {
        return Err(Error::Config(format!("partition size J = {j} must be at least 2 (eps = {eps})")));
    }
    if !(scheme.n_scale > 0.0) {
        return Err(Error::Config(format!("N scale must be positive, got {}", scheme.n_scale)));
    }
    let n = ceil_tol(scheme.n_scale / eps).max(1);
    let delta = scheme.delta_rule.resolve(eps);
    if !(delta > 0.0) {
        return Err(Error::Config(format!("Delta must be positive, got {delta}")));
    }
    Ok(ResolvedScheme { epsilon: eps, j, n, delta })
}

/// A resolved scheme bound to a sampling grid: every span is a whole number of grid intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundScheme {
    pub resolved: ResolvedScheme,
    /// Grid intervals per partition sub-interval `eps / J`.
    pub sub_steps: usize,
    /// Grid intervals per sub-sampling step; `Delta` snapped to the grid.
    pub delta_steps: usize,
    pub delta: f64,
}

impl ResolvedScheme {
    pub fn bind(&self, grid: &TimeGrid) -> Result<BoundScheme> {
        let sub_steps = grid.intervals_of(self.epsilon / self.j as f64)?;
        if sub_steps == 0 {
            return Err(Error::GridMismatch { time: self.epsilon / self.j as f64, t0: grid.t0, spacing: grid.spacing });
        }
        let delta_steps = ((self.delta / grid.spacing).round() as usize).max(1);
        if self.delta < self.epsilon {
            log::warn!(
                "Delta = {} is smaller than eps = {}; realized-volatility windows overlap",
                self.delta,
                self.epsilon
            );
        }
        Ok(BoundScheme { resolved: *self, sub_steps, delta_steps, delta: delta_steps as f64 * grid.spacing })
    }
}

/// `(1/eps) sum_{k=1}^{J} (R_{t_k} - R_{t_{k-1}})^2` with `t_k = t - eps + k eps / J`.
pub fn realized_volatility(returns: &[f64], grid: &TimeGrid, t: f64, eps: f64, j: u64) -> Result<f64> {
    if j == 0 || !(eps > 0.0) {
        return Err(Error::Domain(format!("need eps > 0 and J >= 1 (got {eps}, {j})")));
    }
    if returns.len() != grid.len {
        return Err(Error::Domain("return path length does not match its grid".into()));
    }
    let start = grid.index_of(t - eps)?;
    let sub = grid.intervals_of(eps / j as f64)?;
    let end = grid.index_of(t)?;
    if sub == 0 || start + sub * j as usize != end {
        return Err(Error::GridMismatch { time: t - eps, t0: grid.t0, spacing: grid.spacing });
    }
    Ok(window_sum(returns, start, sub, j as usize) / eps)
}

#[inline]
pub(crate) fn window_sum(returns: &[f64], start: usize, sub: usize, j: usize) -> f64 {
    let mut acc = 0.0;
    let mut prev = returns[start];
    for k in 1..=j {
        let cur = returns[start + k * sub];
        let d = cur - prev;
        acc += d * d;
        prev = cur;
    }
    acc
}

/// Sub-sampled realized volatilities `W_k = Y^eps_{k Delta}` of one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizedSeries {
    pub observations: Vec<f64>,
    /// Index `k` of the first observation.
    pub first_k: u64,
    pub epsilon: f64,
    /// `Delta` after snapping to the sampling grid.
    pub delta: f64,
    pub j: u64,
    pub path_id: u64,
    pub seed: u64,
}

impl RealizedSeries {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// CSV with `#`-prefixed provenance comments and columns `k,t,W`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# epsilon={}", self.epsilon)?;
        writeln!(out, "# J={}", self.j)?;
        writeln!(out, "# delta={}", self.delta)?;
        writeln!(out, "# seed={}", self.seed)?;
        writeln!(out, "# path_id={}", self.path_id)?;
        writeln!(out, "k,t,W")?;
        for (i, w) in self.observations.iter().enumerate() {
            let k = self.first_k + i as u64;
            writeln!(out, "{},{},{}", k, k as f64 * self.delta, w)?;
        }
        Ok(())
    }
}

/// Realized-volatility series of path `path_id` under `scheme`.
pub fn realized_series(bundle: &PathBundle, path_id: u64, scheme: &WindowScheme) -> Result<RealizedSeries> {
    let resolved = resolve_scheme(scheme)?;
    let bound = resolved.bind(&bundle.grid)?;
    let pos = bundle.position_of(path_id)?;
    let returns = bundle.returns(pos);
    let grid = &bundle.grid;

    let window_steps = bound.sub_steps * resolved.j as usize;
    // first k with k Delta - eps >= t0, in grid units relative to t0
    let origin = grid.t0 / grid.spacing;
    let origin_steps = origin.round() as i64;
    if (origin - origin_steps as f64).abs() > 1e-7 {
        return Err(Error::GridMismatch { time: 0.0, t0: grid.t0, spacing: grid.spacing });
    }
    let d = bound.delta_steps as i64;
    let need = origin_steps + window_steps as i64;
    let first_k = ((need + d - 1) / d).max(1) as u64;
    let n = resolved.n;
    let last_index = n as i64 * d - origin_steps;
    if last_index >= grid.len as i64 {
        return Err(Error::HorizonTooShort {
            required: n as f64 * bound.delta,
            available: grid.end(),
        });
    }
    let mut observations = Vec::with_capacity((n + 1).saturating_sub(first_k) as usize);
    for k in first_k..=n {
        let end = k as i64 * d - origin_steps;
        let start = (end - window_steps as i64) as usize;
        observations.push(window_sum(returns, start, bound.sub_steps, resolved.j as usize) / resolved.epsilon);
    }
    Ok(RealizedSeries {
        observations,
        first_k,
        epsilon: resolved.epsilon,
        delta: bound.delta,
        j: resolved.j,
        path_id,
        seed: bundle.provenance.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::HestonParams;
    use crate::sim::{simulate, Provenance, SimConfig};
    use proptest::prelude::*;

    fn unit_grid(len: usize, spacing: f64) -> TimeGrid {
        TimeGrid { t0: 0.0, spacing, len }
    }

    #[test]
    fn direct_evaluation() {
        let r = [0.0, 0.1, -0.1, 0.2];
        let g = unit_grid(4, 1.0 / 3.0);
        let y = realized_volatility(&r, &g, 1.0, 1.0, 3).unwrap();
        assert!((y - 0.14).abs() < 1e-15);
        let flat = [2.0; 11];
        assert_eq!(realized_volatility(&flat, &unit_grid(11, 0.1), 1.0, 1.0, 10).unwrap(), 0.0);
    }

    #[test]
    fn off_grid_points_are_rejected() {
        let r = vec![0.0; 11];
        let g = unit_grid(11, 0.1);
        assert!(matches!(realized_volatility(&r, &g, 1.0, 0.5, 3), Err(Error::GridMismatch { .. })));
        assert!(matches!(realized_volatility(&r, &g, 0.3, 0.5, 5), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn scheme_resolution() {
        let s = WindowScheme::new(0.01, JRule::Inverse, 100.0, DeltaRule::SqrtEps);
        let r = resolve_scheme(&s).unwrap();
        assert_eq!((r.j, r.n), (100, 10_000));
        assert!((r.delta - 0.1).abs() < 1e-15);
        let r = resolve_scheme(&s.with_epsilon(0.05)).unwrap();
        assert_eq!(r.j, 20);
        let sq = WindowScheme::new(0.05, JRule::InverseSquare, 1.0, DeltaRule::Constant(0.5));
        assert_eq!(resolve_scheme(&sq).unwrap().j, 400);
        assert_eq!(resolve_scheme(&sq.with_epsilon(0.1)).unwrap().j, 100);
        let bad = WindowScheme::new(1.0, JRule::Inverse, 1.0, DeltaRule::SqrtEps);
        assert!(resolve_scheme(&bad).is_err());
    }

    #[test]
    fn j_rule_parsing() {
        assert_eq!("inverse".parse::<JRule>().unwrap(), JRule::Inverse);
        assert_eq!("const:40".parse::<JRule>().unwrap(), JRule::Constant(40));
        assert_eq!("10".parse::<JRule>().unwrap(), JRule::Constant(10));
        assert!("bogus".parse::<JRule>().is_err());
        assert_eq!(JRule::InverseSquare.to_string().parse::<JRule>().unwrap(), JRule::InverseSquare);
    }

    fn bundle_from(returns: Vec<f64>, spacing: f64) -> PathBundle {
        let len = returns.len();
        PathBundle::from_parts(
            unit_grid(len, spacing),
            Provenance { seed: 1, first_path: 0, n_paths: 1, dt: spacing },
            returns,
            None,
        )
        .unwrap()
    }

    #[test]
    fn single_observation_series() {
        let returns: Vec<f64> = (0..=20).map(|i| ((i * 7 % 5) as f64) * 0.1).collect();
        let b = bundle_from(returns.clone(), 0.05);
        let s = WindowScheme::new(1.0, JRule::Constant(4), 1.0, DeltaRule::Constant(1.0));
        let series = realized_series(&b, 0, &s).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series.first_k, 1);
        let direct = realized_volatility(&returns, &b.grid, 1.0, 1.0, 4).unwrap();
        assert_eq!(series.observations[0], direct);
    }

    #[test]
    fn horizon_too_short_reports_requirement() {
        let b = bundle_from(vec![0.0; 21], 0.05);
        let s = WindowScheme::new(0.2, JRule::Constant(4), 0.6, DeltaRule::Constant(0.5));
        assert!(realized_series(&b, 0, &WindowScheme { n_scale: 0.4, ..s }).is_ok());
        match realized_series(&b, 0, &s) {
            Err(Error::HorizonTooShort { required, .. }) => assert!((required - 1.5).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn series_skips_incomplete_windows_and_matches_pointwise() {
        let p = HestonParams::new(1.7, 4.0, 2.0, 0.05, 0.0).unwrap();
        let cfg = SimConfig::new(0.001, 3.0, 4.0, 0.0, 2, 8).unwrap();
        let b = simulate(&p, &cfg).unwrap();
        let s = WindowScheme::new(0.1, JRule::Constant(10), 0.5, DeltaRule::Constant(0.04));
        let series = realized_series(&b, 1, &s).unwrap();
        // smallest k with 0.04 k >= 0.1
        assert_eq!(series.first_k, 3);
        assert_eq!(series.len(), 5 - 3 + 1);
        for (i, w) in series.observations.iter().enumerate() {
            let t = (series.first_k + i as u64) as f64 * 0.04;
            let y = realized_volatility(b.returns(1), &b.grid, t, 0.1, 10).unwrap();
            assert!((w - y).abs() < 1e-12);
            assert!(*w >= 0.0);
        }
        let mut csv = Vec::new();
        series.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("# epsilon=0.1\n# J=10\n"));
        assert!(text.contains("\nk,t,W\n3,"));
    }

    #[test]
    fn long_partition_tracks_variance_better() {
        let p = HestonParams::new(1.7, 4.0, 2.0, 0.05, 0.0).unwrap();
        let cfg = SimConfig::new(1e-6, 1.0, 4.0, 0.0, 1, 21).unwrap().with_recording(0.9, 1).unwrap();
        let b = simulate(&p, &cfg).unwrap();
        let v_end = *b.variances(0).unwrap().last().unwrap();
        let mut mean_err = Vec::new();
        for j in [10u64, 10_000] {
            let mut e = 0.0;
            let ts: Vec<f64> = (0..=80).map(|i| 0.92 + i as f64 * 0.001).collect();
            for &t in &ts {
                let y = realized_volatility(b.returns(0), &b.grid, t, 0.01, j).unwrap();
                let v = b.variances(0).unwrap()[b.grid.index_of(t).unwrap()];
                e += (y - v).abs();
            }
            mean_err.push(e / ts.len() as f64);
        }
        assert!(v_end > 0.0);
        assert!(mean_err[1] < 0.5 * mean_err[0], "{mean_err:?}");
    }

    proptest! {
        #[test]
        fn scale_equivariance(incs in proptest::collection::vec(-1.0f64..1.0, 12), c in -5.0f64..5.0) {
            let mut r = vec![0.0];
            for d in &incs { r.push(r.last().unwrap() + d); }
            let scaled: Vec<f64> = r.iter().map(|x| c * x).collect();
            let g = unit_grid(13, 1.0 / 12.0);
            let a = realized_volatility(&r, &g, 1.0, 1.0, 12).unwrap();
            let b = realized_volatility(&scaled, &g, 1.0, 1.0, 12).unwrap();
            prop_assert!((b - c * c * a).abs() <= 1e-12 * (1.0 + b.abs()));
        }

        #[test]
        fn window_additivity(incs in proptest::collection::vec(-1.0f64..1.0, 12), split in 1usize..12) {
            let mut r = vec![0.0];
            for d in &incs { r.push(r.last().unwrap() + d); }
            let h = 1.0 / 12.0;
            let g = unit_grid(13, h);
            let full = realized_volatility(&r, &g, 1.0, 1.0, 12).unwrap();
            let e1 = split as f64 * h;
            let e2 = 1.0 - e1;
            let left = realized_volatility(&r, &g, e1, e1, split as u64).unwrap();
            let right = realized_volatility(&r, &g, 1.0, e2, (12 - split) as u64).unwrap();
            prop_assert!((e1 * left + e2 * right - full).abs() < 1e-12);
        }
    }
}
