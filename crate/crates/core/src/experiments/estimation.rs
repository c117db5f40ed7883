use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::regression::{fit_subset, slope_fit, SlopeFit};
use super::SimTemplate;
use crate::error::{Error, Result};
use crate::estimators::{
    empirical_moments, estimate_params, lag_index, lag_quality_check, EstimateRow, MomentEstimates,
};
use crate::moments::stationary_moments;
use crate::params::HestonParams;
use crate::realized::{realized_series, resolve_scheme, DeltaRule, JRule, ResolvedScheme, WindowScheme};
use crate::sim::{simulate, steps_of, SimConfig};

/// Settings of a Monte Carlo study of the moment estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorStudyConfig {
    pub params: HestonParams,
    pub eps_grid: Vec<f64>,
    pub j_rule: JRule,
    pub n_scale: f64,
    pub delta_rule: DeltaRule,
    /// Lags at which `K(u)` is reported; the first one drives the `kappa` estimate.
    pub lags: Vec<f64>,
    pub mc: usize,
    pub sim: SimTemplate,
}

/// Layout for one window width.
#[derive(Debug, Clone)]
pub struct EpsPlan {
    pub resolved: ResolvedScheme,
    /// `Delta` rounded to the recorded grid.
    pub delta: f64,
    pub sim: SimConfig,
    pub scheme: WindowScheme,
}

#[derive(Debug, Clone)]
pub struct EstimatorPlan {
    pub config: EstimatorStudyConfig,
    pub eps: Vec<EpsPlan>,
}

impl EstimatorStudyConfig {
    pub fn plan(&self) -> Result<EstimatorPlan> {
        if self.eps_grid.is_empty() {
            return Err(Error::Config("eps grid is empty".into()));
        }
        if self.lags.is_empty() || self.lags.iter().any(|&u| !(u > 0.0)) {
            return Err(Error::Config("need at least one positive lag".into()));
        }
        if self.mc < 2 {
            return Err(Error::Config(format!("need at least 2 replicates, got {}", self.mc)));
        }
        let dt = self.sim.dt;
        let mut eps = Vec::with_capacity(self.eps_grid.len());
        for &e in &self.eps_grid {
            let scheme = WindowScheme::new(e, self.j_rule, self.n_scale, self.delta_rule);
            let resolved = resolve_scheme(&scheme)?;
            let stride = steps_of(e / resolved.j as f64, dt, &format!("eps/J for eps = {e}"))?;
            if stride == 0 {
                return Err(Error::Config(format!("eps/J = {} is below dt = {dt}", e / resolved.j as f64)));
            }
            let spacing = stride as f64 * dt;
            let delta_steps = ((resolved.delta / spacing).round() as u64).max(1);
            let delta = delta_steps as f64 * spacing;
            for &u in &self.lags {
                if lag_index(u, delta) as u64 >= resolved.n {
                    return Err(Error::Config(format!("lag {u} exceeds the series length at eps = {e}")));
                }
            }
            let horizon = (resolved.n * delta_steps * stride) as f64 * dt;
            let sim = SimConfig {
                dt,
                horizon,
                v0: self.sim.v0_for(self.params.theta),
                r0: self.sim.r0,
                n_paths: self.mc as u64,
                seed: self.sim.seed,
                store_v: false,
                first_path: 0,
                record_from: 0.0,
                record_stride: stride,
            };
            sim.check()?;
            let scheme = WindowScheme { delta_rule: DeltaRule::Constant(delta), ..scheme };
            eps.push(EpsPlan { resolved: ResolvedScheme { delta, ..resolved }, delta, sim, scheme });
        }
        Ok(EstimatorPlan { config: self.clone(), eps })
    }
}

/// Produces the empirical moments of one replicate at one window width.
pub trait ReplicateSource: Sync {
    fn moments(&self, plan: &EstimatorPlan, eps_index: usize, replicate: u64) -> Result<MomentEstimates>;
}

/// Moments from a freshly simulated path per replicate.
pub struct SimulatedReplicates;

impl ReplicateSource for SimulatedReplicates {
    fn moments(&self, plan: &EstimatorPlan, eps_index: usize, replicate: u64) -> Result<MomentEstimates> {
        let ep = &plan.eps[eps_index];
        let cfg = ep.sim.clone().with_paths(replicate, 1);
        let bundle = simulate(&plan.config.params, &cfg)?;
        let series = realized_series(&bundle, replicate, &ep.scheme)?;
        empirical_moments(&series, &plan.config.lags)
    }
}

/// Root-mean-square error with a delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStat {
    pub l2: f64,
    pub std_error: f64,
    pub n: usize,
}

pub fn l2_error(estimates: &[f64], truth: f64) -> ErrorStat {
    let n = estimates.len();
    if n == 0 {
        return ErrorStat { l2: f64::NAN, std_error: f64::NAN, n };
    }
    let sq: Vec<f64> = estimates.iter().map(|x| (x - truth).powi(2)).collect();
    let mse = sq.iter().sum::<f64>() / n as f64;
    let var = sq.iter().map(|s| (s - mse).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
    let se_mse = (var / n as f64).sqrt();
    let l2 = mse.sqrt();
    let std_error = if l2 > 0.0 { se_mse / (2.0 * l2) } else { 0.0 };
    ErrorStat { l2, std_error, n }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorEntry {
    pub epsilon: f64,
    pub j: u64,
    pub n_obs: u64,
    pub delta: f64,
    pub theta: ErrorStat,
    pub kappa: ErrorStat,
    pub gamma: ErrorStat,
    pub m: ErrorStat,
    pub k0: ErrorStat,
    /// One per configured lag; the truth is the covariance at the realized lag.
    pub k_lag: Vec<(f64, f64, ErrorStat)>,
    pub degenerate: usize,
    pub lag_quality_pass: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantitySlope {
    pub quantity: String,
    pub fit: SlopeFit,
    pub eps_used: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub config: EstimatorStudyConfig,
    pub entries: Vec<EstimatorEntry>,
    pub slopes: Vec<QuantitySlope>,
    pub rows: Vec<EstimateRow>,
}

impl EstimatorEntry {
    /// Error statistic by quantity name (`theta`, `kappa`, `gamma`, `m`, `k0`, `k(u)`).
    pub fn stat(&self, quantity: &str) -> Option<ErrorStat> {
        match quantity {
            "theta" => Some(self.theta),
            "kappa" => Some(self.kappa),
            "gamma" => Some(self.gamma),
            "m" => Some(self.m),
            "k0" => Some(self.k0),
            _ => self.k_lag.iter().find(|(u, _, _)| lag_name(*u) == quantity).map(|t| t.2),
        }
    }

    pub fn quantities(&self) -> Vec<String> {
        let mut q: Vec<String> = ["theta", "kappa", "gamma", "m", "k0"].iter().map(|s| s.to_string()).collect();
        q.extend(self.k_lag.iter().map(|(u, _, _)| lag_name(*u)));
        q
    }
}

pub(crate) fn lag_name(u: f64) -> String {
    format!("k(u={u})")
}

impl EstimatorReport {
    pub fn slope(&self, quantity: &str) -> Option<&QuantitySlope> {
        self.slopes.iter().find(|s| s.quantity == quantity)
    }
}

pub fn estimator_error_study(cfg: &EstimatorStudyConfig) -> Result<EstimatorReport> {
    estimator_error_study_with(cfg, &SimulatedReplicates)
}

pub fn estimator_error_study_with<S: ReplicateSource + ?Sized>(
    cfg: &EstimatorStudyConfig,
    source: &S,
) -> Result<EstimatorReport> {
    let plan = cfg.plan()?;
    let p = &cfg.params;
    let truth = stationary_moments(p);
    let u_kappa = cfg.lags[0];
    let mut entries = Vec::with_capacity(plan.eps.len());
    let mut rows = Vec::new();

    for (ei, ep) in plan.eps.iter().enumerate() {
        let moments: Vec<MomentEstimates> = (0..cfg.mc as u64)
            .into_par_iter()
            .map(|rep| source.moments(&plan, ei, rep))
            .collect::<Result<_>>()?;
        log::debug!("estimator study: eps = {} done ({} replicates)", ep.resolved.epsilon, cfg.mc);

        let (mut th, mut ka, mut ga) = (Vec::new(), Vec::new(), Vec::new());
        let mut degenerate = 0;
        let mut lag_quality_pass = 0;
        for (rep, m) in moments.iter().enumerate() {
            let est = estimate_params(m, u_kappa);
            match &est {
                Ok(e) => {
                    th.push(e.theta);
                    ka.push(e.kappa);
                    ga.push(e.gamma);
                    if lag_quality_check(e).pass {
                        lag_quality_pass += 1;
                    }
                }
                Err(Error::EstimationDegenerate(_)) => degenerate += 1,
                Err(e) => return Err(Error::Domain(e.to_string())),
            }
            rows.push(EstimateRow::new(rep as u64, m, u_kappa, est.as_ref().ok()));
        }

        let m_hat: Vec<f64> = moments.iter().map(|m| m.m_hat).collect();
        let k0_hat: Vec<f64> = moments.iter().filter_map(|m| m.variance().map(|l| l.value)).collect();
        let mut k_lag = Vec::with_capacity(cfg.lags.len());
        for &u in &cfg.lags {
            let vals: Vec<f64> = moments.iter().filter_map(|m| m.lag(u).map(|l| l.value)).collect();
            let realized = lag_index(u, ep.delta) as f64 * ep.delta;
            k_lag.push((u, realized, l2_error(&vals, truth.covariance(realized))));
        }
        entries.push(EstimatorEntry {
            epsilon: ep.resolved.epsilon,
            j: ep.resolved.j,
            n_obs: ep.resolved.n,
            delta: ep.delta,
            theta: l2_error(&th, p.theta),
            kappa: l2_error(&ka, p.kappa),
            gamma: l2_error(&ga, p.gamma),
            m: l2_error(&m_hat, truth.m1),
            k0: l2_error(&k0_hat, truth.covariance(0.0)),
            k_lag,
            degenerate,
            lag_quality_pass,
        });
    }

    let mut slopes = Vec::new();
    if let Some(first) = entries.first() {
        for q in first.quantities() {
            let mut pts: Vec<(f64, f64)> =
                entries.iter().filter_map(|e| e.stat(&q).map(|s| (e.epsilon, s.l2))).collect();
            pts.sort_by(|a, b| b.0.total_cmp(&a.0));
            let used = fit_subset(&pts);
            if used.len() < 2 || used.iter().any(|p| !(p.1 > 0.0) || !p.1.is_finite()) {
                continue;
            }
            let fit = slope_fit(&used)?;
            slopes.push(QuantitySlope { quantity: q, fit, eps_used: used.iter().map(|p| p.0).collect() });
        }
    }
    Ok(EstimatorReport { config: cfg.clone(), entries, slopes, rows })
}
