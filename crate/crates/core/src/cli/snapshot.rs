//! Single-path trajectories of `V_t` next to `Y_t^eps` for several partition rules.

use std::io::Write;

use serde::Serialize;

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::params::HestonParams;
use crate::realized::{realized_volatility, JRule};
use crate::sim::{simulate, steps_of, SimConfig};

#[derive(Debug, Clone)]
pub struct SnapshotPlan {
    pub params: HestonParams,
    /// `(eps, rule, J)` combinations.
    pub combos: Vec<(f64, JRule, u64)>,
    /// Spacing of the emitted time grid.
    pub delta: f64,
    pub sim: SimConfig,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl SnapshotPlan {
    pub fn new(params: HestonParams, cfg: &ExperimentConfig) -> Result<Self> {
        let s = &cfg.snapshot;
        let dt = cfg.sim.dt;
        if cfg.grids.eps.is_empty() || cfg.grids.j_rules.is_empty() {
            return Err(Error::Config("snapshot needs at least one eps and one J rule".into()));
        }
        let mut stride = steps_of(s.delta, dt, "snapshot delta")?;
        if stride == 0 {
            return Err(Error::Config(format!("snapshot delta {} is below dt", s.delta)));
        }
        steps_of(s.horizon, dt, "snapshot horizon")?;
        let mut combos = Vec::new();
        for &eps in &cfg.grids.eps {
            if !(eps > 0.0) || eps > s.horizon {
                return Err(Error::Config(format!("eps = {eps} must lie in (0, horizon]")));
            }
            for &rule in &cfg.grids.j_rules {
                let j = rule.resolve(eps);
                let sub = steps_of(eps / j as f64, dt, &format!("eps/J for eps = {eps}, J = {j}"))?;
                if j == 0 || sub == 0 {
                    return Err(Error::Config(format!("eps/J = {} is below dt = {dt}", eps / j as f64)));
                }
                stride = gcd(stride, sub);
                combos.push((eps, rule, j));
            }
        }
        let sim = SimConfig {
            dt,
            horizon: s.horizon,
            v0: cfg.sim.v0.unwrap_or(params.theta),
            r0: cfg.sim.r0,
            n_paths: 1,
            seed: cfg.sim.seed,
            store_v: true,
            first_path: s.path,
            record_from: 0.0,
            record_stride: stride,
        };
        sim.check()?;
        Ok(Self { params, combos, delta: s.delta, sim })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnapshotPoint {
    pub eps: f64,
    pub j: u64,
    pub t: f64,
    pub v: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotDiagnostics {
    pub beta: f64,
    pub eps: f64,
    pub j_rule: String,
    pub j: u64,
    pub points: usize,
    pub max_abs_error: f64,
    pub rms_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub beta: f64,
    /// One trajectory per combination, in plan order.
    pub series: Vec<(JRule, Vec<SnapshotPoint>)>,
    pub diagnostics: Vec<SnapshotDiagnostics>,
}

pub fn run_snapshot(plan: &SnapshotPlan) -> Result<Snapshot> {
    let bundle = simulate(&plan.params, &plan.sim)?;
    let grid = &bundle.grid;
    let returns = bundle.returns(0);
    let v = bundle.variances(0).expect("snapshot stores variances");
    let delta_steps = grid.intervals_of(plan.delta)?;
    let mut series = Vec::with_capacity(plan.combos.len());
    let mut diagnostics = Vec::with_capacity(plan.combos.len());
    for &(eps, rule, j) in &plan.combos {
        let first = grid.intervals_of(eps)?.div_ceil(delta_steps);
        let mut points = Vec::new();
        let mut idx = first * delta_steps;
        while idx < grid.len {
            let t = grid.time(idx);
            let y = realized_volatility(returns, grid, t, eps, j)?;
            points.push(SnapshotPoint { eps, j, t, v: v[idx], y });
            idx += delta_steps;
        }
        let n = points.len();
        let max_abs_error = points.iter().map(|p| (p.y - p.v).abs()).fold(0.0, f64::max);
        let rms_error = (points.iter().map(|p| (p.y - p.v).powi(2)).sum::<f64>() / n.max(1) as f64).sqrt();
        diagnostics.push(SnapshotDiagnostics {
            beta: plan.params.beta,
            eps,
            j_rule: rule.to_string(),
            j,
            points: n,
            max_abs_error,
            rms_error,
        });
        series.push((rule, points));
    }
    Ok(Snapshot { beta: plan.params.beta, series, diagnostics })
}

pub const SNAPSHOT_HEADER: &str = "beta,eps,j_rule,j,t,V,Y";

pub fn write_snapshot_rows<W: Write>(snapshot: &Snapshot, mut out: W) -> Result<()> {
    for (rule, points) in &snapshot.series {
        for p in points {
            writeln!(out, "{},{},{},{},{},{},{}", snapshot.beta, p.eps, rule, p.j, p.t, p.v, p.y)?;
        }
    }
    Ok(())
}
