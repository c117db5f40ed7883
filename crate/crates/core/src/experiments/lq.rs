use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::regression::{fit_subset, slope_fit, SlopeFit};
use super::SimTemplate;
use crate::error::{Error, Result};
use crate::params::HestonParams;
use crate::realized::{window_sum, JRule};
use crate::sim::{simulate_path, steps_of, PathBundle, SimConfig};

/// Settings of an `||Y_T^eps - V_T||_q` study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqStudyConfig {
    pub params: HestonParams,
    pub eps_grid: Vec<f64>,
    pub j_rules: Vec<JRule>,
    pub q_list: Vec<u32>,
    pub t_eval: f64,
    pub n_blocks: usize,
    pub block_size: usize,
    pub sim: SimTemplate,
}

/// One `(eps, J)` pair evaluated at `t_eval`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Combo {
    pub epsilon: f64,
    pub j_rule: JRule,
    pub j: u64,
    /// Recorded-grid intervals per sub-interval `eps / J`.
    pub sub: usize,
}

/// A validated study: combinations plus the recording layout that serves all of them.
#[derive(Debug, Clone)]
pub struct LqPlan {
    pub config: LqStudyConfig,
    pub combos: Vec<Combo>,
    pub sim: SimConfig,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl LqStudyConfig {
    pub fn plan(&self) -> Result<LqPlan> {
        if self.eps_grid.is_empty() {
            return Err(Error::Config("eps grid is empty".into()));
        }
        if self.j_rules.is_empty() {
            return Err(Error::Config("no J rules given".into()));
        }
        if self.q_list.is_empty() || self.q_list.contains(&0) {
            return Err(Error::Config("q list must be non-empty with q >= 1".into()));
        }
        if self.n_blocks < 2 || self.block_size < 2 {
            return Err(Error::Config(format!(
                "need at least 2 blocks of 2 paths (got {} x {})",
                self.n_blocks, self.block_size
            )));
        }
        let dt = self.sim.dt;
        let eps_max = self.eps_grid.iter().copied().fold(0.0, f64::max);
        if self.eps_grid.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Config("every eps must be positive".into()));
        }
        if eps_max > self.t_eval {
            return Err(Error::Config(format!("eps = {eps_max} exceeds the evaluation time {}", self.t_eval)));
        }
        let t_steps = steps_of(self.t_eval, dt, "t_eval")?;
        let window_max = steps_of(eps_max, dt, "eps")?;

        let mut raw = Vec::new();
        let mut stride = 0u64;
        for &eps in &self.eps_grid {
            steps_of(eps, dt, "eps")?;
            for &rule in &self.j_rules {
                let j = rule.resolve(eps);
                if j < 1 {
                    return Err(Error::Config(format!("J rule {rule} gives J = 0 at eps = {eps}")));
                }
                let sub = steps_of(eps / j as f64, dt, &format!("eps/J for eps = {eps}, J = {j}"))?;
                if sub == 0 {
                    return Err(Error::Config(format!("eps/J = {} is below dt = {dt}", eps / j as f64)));
                }
                stride = gcd(stride, sub);
                raw.push((eps, rule, j, sub));
            }
        }
        let combos = raw
            .into_iter()
            .map(|(epsilon, j_rule, j, sub)| Combo { epsilon, j_rule, j, sub: (sub / stride) as usize })
            .collect();
        let record_from = (t_steps - window_max) as f64 * dt;
        let n_paths = (self.n_blocks * self.block_size) as u64;
        let sim = SimConfig {
            dt,
            horizon: self.t_eval,
            v0: self.sim.v0_for(self.params.theta),
            r0: self.sim.r0,
            n_paths,
            seed: self.sim.seed,
            store_v: true,
            first_path: 0,
            record_from,
            record_stride: stride,
        };
        sim.check()?;
        Ok(LqPlan { config: self.clone(), combos, sim })
    }
}

impl LqPlan {
    /// `(Y, V)` at the evaluation time for one path's recorded returns and variances.
    pub fn observe(&self, returns: &[f64], variances: &[f64]) -> Vec<(f64, f64)> {
        let last = returns.len() - 1;
        let v = variances[last];
        self.combos
            .iter()
            .map(|c| {
                let window = c.sub * c.j as usize;
                (window_sum(returns, last - window, c.sub, c.j as usize) / c.epsilon, v)
            })
            .collect()
    }

    /// [`LqPlan::observe`] for every path of a bundle recorded with this plan's layout.
    pub fn observe_bundle(&self, bundle: &PathBundle) -> Result<Vec<Vec<(f64, f64)>>> {
        (0..bundle.n_paths())
            .into_par_iter()
            .map(|i| {
                let v = bundle
                    .variances(i)
                    .ok_or_else(|| Error::Domain("bundle lacks variance samples".into()))?;
                Ok(self.observe(bundle.returns(i), v))
            })
            .collect()
    }
}

/// Produces `(Y, V)` observations for a range of path indices.
pub trait ObservationSource: Sync {
    fn observe_block(&self, plan: &LqPlan, paths: Range<u64>) -> Result<Vec<Vec<(f64, f64)>>>;
}

/// Observations from freshly simulated Heston paths, one path in memory per worker.
pub struct SimulatedObservations;

impl ObservationSource for SimulatedObservations {
    fn observe_block(&self, plan: &LqPlan, paths: Range<u64>) -> Result<Vec<Vec<(f64, f64)>>> {
        let cfg = plan.sim.clone().with_paths(paths.start, paths.end - paths.start);
        paths
            .into_par_iter()
            .map(|i| {
                let path = simulate_path(&plan.config.params, &cfg, i)?;
                let v = path.variances.as_deref().expect("plan stores variances");
                Ok(plan.observe(&path.returns, v))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockEstimate {
    /// Mean over blocks of the per-block `L^q` estimates.
    pub estimate: f64,
    /// Spread of the block estimates (divides by the block count, no further scaling).
    pub sigma: f64,
    /// `sigma / sqrt(n_blocks)`.
    pub std_error: f64,
}

/// Per-block `(mean |e|^q)^{1/q}` averaged over consecutive blocks.
pub fn block_lq(abs_errors: &[f64], block_size: usize, q: u32) -> BlockEstimate {
    let blocks: Vec<f64> = abs_errors
        .chunks(block_size)
        .map(|b| {
            let m = b.iter().map(|e| e.powi(q as i32)).sum::<f64>() / b.len() as f64;
            m.powf(1.0 / q as f64)
        })
        .collect();
    let n = blocks.len() as f64;
    let estimate = blocks.iter().sum::<f64>() / n;
    let sigma = (blocks.iter().map(|l| (l - estimate).powi(2)).sum::<f64>() / n).sqrt();
    BlockEstimate { estimate, sigma, std_error: sigma / n.sqrt() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqEntry {
    pub epsilon: f64,
    pub j_rule: JRule,
    pub j: u64,
    pub q: u32,
    pub estimate: f64,
    pub sigma: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqSlope {
    pub j_rule: JRule,
    pub q: u32,
    pub fit: SlopeFit,
    pub eps_used: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub config: LqStudyConfig,
    pub entries: Vec<LqEntry>,
    pub slopes: Vec<LqSlope>,
}

impl ErrorReport {
    pub fn entry(&self, epsilon: f64, j_rule: JRule, q: u32) -> Option<&LqEntry> {
        self.entries
            .iter()
            .find(|e| (e.epsilon - epsilon).abs() < 1e-12 && e.j_rule == j_rule && e.q == q)
    }

    pub fn slope(&self, j_rule: JRule, q: u32) -> Option<&LqSlope> {
        self.slopes.iter().find(|s| s.j_rule == j_rule && s.q == q)
    }
}

pub fn lq_error_study(cfg: &LqStudyConfig) -> Result<ErrorReport> {
    lq_error_study_with(cfg, &SimulatedObservations)
}

pub fn lq_error_study_with<S: ObservationSource + ?Sized>(cfg: &LqStudyConfig, source: &S) -> Result<ErrorReport> {
    let plan = cfg.plan()?;
    let n_combos = plan.combos.len();
    let mut errors: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.n_blocks * cfg.block_size); n_combos];
    for b in 0..cfg.n_blocks {
        let start = (b * cfg.block_size) as u64;
        let obs = source.observe_block(&plan, start..start + cfg.block_size as u64)?;
        if obs.len() != cfg.block_size {
            return Err(Error::Domain(format!("block {b} returned {} paths", obs.len())));
        }
        for path in obs {
            for (c, (y, v)) in path.into_iter().enumerate() {
                errors[c].push((y - v).abs());
            }
        }
        log::debug!("lq study: block {}/{} done", b + 1, cfg.n_blocks);
    }

    let mut entries = Vec::with_capacity(n_combos * cfg.q_list.len());
    for (c, combo) in plan.combos.iter().enumerate() {
        for &q in &cfg.q_list {
            let est = block_lq(&errors[c], cfg.block_size, q);
            entries.push(LqEntry {
                epsilon: combo.epsilon,
                j_rule: combo.j_rule,
                j: combo.j,
                q,
                estimate: est.estimate,
                sigma: est.sigma,
                ci_low: est.estimate - 1.96 * est.sigma,
                ci_high: est.estimate + 1.96 * est.sigma,
                std_error: est.std_error,
            });
        }
    }

    let mut slopes = Vec::new();
    for &rule in &cfg.j_rules {
        for &q in &cfg.q_list {
            let mut pts: Vec<(f64, f64)> = entries
                .iter()
                .filter(|e| e.j_rule == rule && e.q == q)
                .map(|e| (e.epsilon, e.estimate))
                .collect();
            pts.sort_by(|a, b| b.0.total_cmp(&a.0));
            let used = fit_subset(&pts);
            if used.len() < 2 || used.iter().any(|p| !(p.1 > 0.0)) {
                continue;
            }
            let fit = slope_fit(&used)?;
            slopes.push(LqSlope { j_rule: rule, q, fit, eps_used: used.iter().map(|p| p.0).collect() });
        }
    }
    Ok(ErrorReport { config: cfg.clone(), entries, slopes })
}
