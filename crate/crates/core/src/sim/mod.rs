//! Full-truncation Euler simulation of the joint return / variance SDEs.
//!
//! Every path draws from its own ChaCha8 stream keyed by `(seed, path_index)`;
//! within a path the stream position advances with the step index. Paths
//! therefore come out bit-identical whatever the thread count or schedule.

mod dump;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::HestonParams;

pub use dump::{read_dump, write_dump, DumpHeader, DUMP_MAGIC, DUMP_VERSION};

/// Converts a time span into a whole number of steps of size `dt`.
pub fn steps_of(span: f64, dt: f64, what: &str) -> Result<u64> {
    if !(span >= 0.0) || !(dt > 0.0) {
        return Err(Error::Config(format!("{what}: need span >= 0 and dt > 0 (span={span}, dt={dt})")));
    }
    let n = (span / dt).round();
    if (n * dt - span).abs() > 1e-9 * span.max(dt) {
        return Err(Error::Config(format!(
            "{what} = {span} is not an integer multiple of the step {dt}"
        )));
    }
    Ok(n as u64)
}

/// Simulation settings for a batch of paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub v0: f64,
    pub r0: f64,
    pub n_paths: u64,
    pub seed: u64,
    pub store_v: bool,
    /// Index of the first simulated path; paths are `first_path..first_path + n_paths`.
    #[serde(default)]
    pub first_path: u64,
    /// Samples before this time are not retained.
    #[serde(default)]
    pub record_from: f64,
    /// Retain every `record_stride`-th grid point.
    #[serde(default = "one")]
    pub record_stride: u64,
}

fn one() -> u64 {
    1
}

impl SimConfig {
    pub fn new(dt: f64, horizon: f64, v0: f64, r0: f64, n_paths: u64, seed: u64) -> Result<Self> {
        let cfg = Self {
            dt,
            horizon,
            v0,
            r0,
            n_paths,
            seed,
            store_v: true,
            first_path: 0,
            record_from: 0.0,
            record_stride: 1,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn with_store_v(mut self, store_v: bool) -> Self {
        self.store_v = store_v;
        self
    }

    pub fn with_paths(mut self, first_path: u64, n_paths: u64) -> Self {
        self.first_path = first_path;
        self.n_paths = n_paths;
        self
    }

    /// Keeps only samples at `record_from + k * stride * dt`.
    pub fn with_recording(mut self, record_from: f64, stride: u64) -> Result<Self> {
        self.record_from = record_from;
        self.record_stride = stride;
        self.check()?;
        Ok(self)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.v0 > 0.0) {
            return Err(Error::Config(format!("v0 must be positive, got {}", self.v0)));
        }
        if !self.r0.is_finite() {
            return Err(Error::Config("r0 must be finite".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::Config("record_stride must be at least 1".into()));
        }
        let n = self.n_steps()?;
        let start = steps_of(self.record_from, self.dt, "record_from")?;
        if start > n {
            return Err(Error::Config(format!(
                "record_from {} lies beyond the horizon {}",
                self.record_from, self.horizon
            )));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> Result<u64> {
        steps_of(self.horizon, self.dt, "horizon")
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        let n = self.n_steps()?;
        let start = steps_of(self.record_from, self.dt, "record_from")?;
        let len = (n - start) / self.record_stride + 1;
        Ok(TimeGrid {
            t0: start as f64 * self.dt,
            spacing: self.record_stride as f64 * self.dt,
            len: len as usize,
        })
    }
}

/// Uniform sampling grid `t0, t0 + spacing, ..., t0 + (len - 1) spacing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub spacing: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.spacing
    }

    pub fn end(&self) -> f64 {
        self.time(self.len.saturating_sub(1))
    }

    /// Index of `t` on the grid; no interpolation is ever performed.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let x = (t - self.t0) / self.spacing;
        let i = x.round();
        if (x - i).abs() > 1e-7 || i < 0.0 || i as usize >= self.len {
            return Err(Error::GridMismatch { time: t, t0: self.t0, spacing: self.spacing });
        }
        Ok(i as usize)
    }

    /// Number of grid intervals spanned by `span`, which must be a whole multiple of the spacing.
    pub fn intervals_of(&self, span: f64) -> Result<usize> {
        let x = span / self.spacing;
        let i = x.round();
        if (x - i).abs() > 1e-7 || i < 0.0 {
            return Err(Error::GridMismatch { time: span, t0: self.t0, spacing: self.spacing });
        }
        Ok(i as usize)
    }
}

/// Where a bundle came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub first_path: u64,
    pub n_paths: u64,
    pub dt: f64,
}

/// One simulated trajectory restricted to the recorded grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPath {
    pub returns: Vec<f64>,
    pub variances: Option<Vec<f64>>,
}

/// Immutable set of simulated `(R, V)` paths on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub grid: TimeGrid,
    pub provenance: Provenance,
    returns: Vec<f64>,
    variances: Option<Vec<f64>>,
}

impl PathBundle {
    pub fn from_parts(
        grid: TimeGrid,
        provenance: Provenance,
        returns: Vec<f64>,
        variances: Option<Vec<f64>>,
    ) -> Result<Self> {
        let expected = grid.len * provenance.n_paths as usize;
        if returns.len() != expected || variances.as_ref().is_some_and(|v| v.len() != expected) {
            return Err(Error::Format(format!(
                "bundle data does not match {} paths x {} samples",
                provenance.n_paths, grid.len
            )));
        }
        Ok(Self { grid, provenance, returns, variances })
    }

    pub fn n_paths(&self) -> usize {
        self.provenance.n_paths as usize
    }

    /// Returns samples of the path at position `i` within the bundle.
    pub fn returns(&self, i: usize) -> &[f64] {
        let n = self.grid.len;
        &self.returns[i * n..(i + 1) * n]
    }

    pub fn variances(&self, i: usize) -> Option<&[f64]> {
        let n = self.grid.len;
        self.variances.as_ref().map(|v| &v[i * n..(i + 1) * n])
    }

    pub fn has_variances(&self) -> bool {
        self.variances.is_some()
    }

    /// Position within the bundle of the global path index `path_id`.
    pub fn position_of(&self, path_id: u64) -> Result<usize> {
        let p = &self.provenance;
        if path_id < p.first_path || path_id >= p.first_path + p.n_paths {
            return Err(Error::Domain(format!(
                "path {path_id} not in bundle range {}..{}",
                p.first_path,
                p.first_path + p.n_paths
            )));
        }
        Ok((path_id - p.first_path) as usize)
    }
}

/// The random stream of one path.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// Simulates a single path with global index `path_index`.
pub fn simulate_path(params: &HestonParams, cfg: &SimConfig, path_index: u64) -> Result<SimulatedPath> {
    let n_steps = cfg.n_steps()?;
    let start = steps_of(cfg.record_from, cfg.dt, "record_from")?;
    let stride = cfg.record_stride;
    let len = ((n_steps - start) / stride + 1) as usize;

    let mut rng = path_rng(cfg.seed, path_index);
    let HestonParams { kappa, theta, gamma, mu, beta } = *params;
    let dt = cfg.dt;
    let sdt = dt.sqrt();
    let beta_c = (1.0 - beta * beta).max(0.0).sqrt();

    let mut returns = Vec::with_capacity(len);
    let mut variances = cfg.store_v.then(|| Vec::with_capacity(len));
    let mut v = cfg.v0;
    let mut r = cfg.r0;
    if start == 0 {
        returns.push(r);
        if let Some(vs) = variances.as_mut() {
            vs.push(v);
        }
    }
    for n in 1..=n_steps {
        let z: f64 = rng.sample(StandardNormal);
        let w: f64 = rng.sample(StandardNormal);
        let vp = v.max(0.0);
        let sv = vp.sqrt();
        r += mu * dt + sv * sdt * z;
        let b = beta * z + beta_c * w;
        v = (v + kappa * (theta - vp) * dt + gamma * sv * sdt * b).max(0.0);
        if n >= start && (n - start) % stride == 0 {
            returns.push(r);
            if let Some(vs) = variances.as_mut() {
                vs.push(v);
            }
        }
    }
    debug_assert_eq!(returns.len(), len);
    Ok(SimulatedPath { returns, variances })
}

/// Simulates `cfg.n_paths` paths in parallel into a bundle.
pub fn simulate(params: &HestonParams, cfg: &SimConfig) -> Result<PathBundle> {
    cfg.check()?;
    let grid = cfg.grid()?;
    let paths: Vec<SimulatedPath> = (cfg.first_path..cfg.first_path + cfg.n_paths)
        .into_par_iter()
        .map(|i| simulate_path(params, cfg, i))
        .collect::<Result<_>>()?;
    let mut returns = Vec::with_capacity(grid.len * paths.len());
    let mut variances = cfg.store_v.then(|| Vec::with_capacity(grid.len * paths.len()));
    for p in paths {
        returns.extend_from_slice(&p.returns);
        if let (Some(all), Some(v)) = (variances.as_mut(), p.variances) {
            all.extend_from_slice(&v);
        }
    }
    PathBundle::from_parts(
        grid,
        Provenance { seed: cfg.seed, first_path: cfg.first_path, n_paths: cfg.n_paths, dt: cfg.dt },
        returns,
        variances,
    )
}

/// Monte Carlo estimate of `||V_{t+h} - V_t||_q` for each `h`.
pub fn holder_scaling_check(
    params: &HestonParams,
    cfg: &SimConfig,
    t: f64,
    h_grid: &[f64],
    q: u32,
) -> Result<Vec<(f64, f64)>> {
    if q == 0 {
        return Err(Error::Config("norm order must be at least 1".into()));
    }
    let t_steps = steps_of(t, cfg.dt, "evaluation time")?;
    let mut offsets = Vec::with_capacity(h_grid.len());
    for &h in h_grid {
        let k = steps_of(h, cfg.dt, "increment h")?;
        offsets.push(k as usize);
    }
    let max_off = offsets.iter().copied().max().unwrap_or(0) as u64;
    let run = SimConfig { horizon: (t_steps + max_off) as f64 * cfg.dt, store_v: true, ..cfg.clone() }
        .with_recording(t, 1)?;

    let sums: Vec<Vec<f64>> = (run.first_path..run.first_path + run.n_paths)
        .into_par_iter()
        .map(|i| {
            let path = simulate_path(params, &run, i)?;
            let v = path.variances.expect("variances stored");
            Ok(offsets.iter().map(|&k| (v[k] - v[0]).abs().powi(q as i32)).collect())
        })
        .collect::<Result<_>>()?;

    let n = sums.len() as f64;
    Ok(h_grid
        .iter()
        .enumerate()
        .map(|(j, &h)| {
            let mean = sums.iter().map(|s| s[j]).sum::<f64>() / n;
            (h, mean.powf(1.0 / q as f64))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> HestonParams {
        HestonParams::new(1.7, 4.0, 2.0, 0.05, 0.0).unwrap()
    }

    #[test]
    fn horizon_must_be_whole_steps() {
        assert!(matches!(SimConfig::new(0.3, 1.0, 4.0, 0.0, 1, 0), Err(Error::Config(_))));
        let cfg = SimConfig::new(0.001, 1.0, 4.0, 0.0, 1, 0).unwrap();
        assert_eq!(cfg.n_steps().unwrap(), 1000);
    }

    #[test]
    fn grid_lengths() {
        let cfg = SimConfig::new(0.01, 1.0, 4.0, 0.0, 3, 7).unwrap();
        let b = simulate(&reference(), &cfg).unwrap();
        assert_eq!(b.grid.len, 101);
        assert_eq!(b.returns(2).len(), 101);
        assert_eq!(b.variances(2).unwrap().len(), 101);
        assert!(b.variances(1).unwrap().iter().all(|&v| v >= 0.0));

        let dec = cfg.clone().with_recording(0.9, 5).unwrap();
        let g = dec.grid().unwrap();
        assert_eq!(g.len, 3);
        assert!((g.t0 - 0.9).abs() < 1e-12 && (g.spacing - 0.05).abs() < 1e-12);
        let d = simulate(&reference(), &dec).unwrap();
        // decimated samples coincide with the full path
        assert_eq!(d.returns(1)[2], b.returns(1)[100]);
        assert_eq!(d.returns(1)[1], b.returns(1)[95]);
    }

    #[test]
    fn bundle_is_schedule_independent() {
        let cfg = SimConfig::new(0.001, 0.5, 4.0, 0.0, 16, 42).unwrap();
        let p = reference();
        let a = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| simulate(&p, &cfg).unwrap());
        let b = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| simulate(&p, &cfg).unwrap());
        assert_eq!(a, b);
        // a sub-range reproduces the same paths
        let sub = simulate(&p, &cfg.clone().with_paths(5, 3)).unwrap();
        assert_eq!(sub.returns(0), a.returns(5));
        assert_eq!(sub.position_of(6).unwrap(), 1);
        assert!(sub.position_of(8).is_err());
    }

    #[test]
    fn degenerate_diffusion_keeps_variance_constant() {
        let p = HestonParams::unchecked(1.7, 4.0, 0.0, 0.05, 0.0);
        let cfg = SimConfig::new(0.01, 2.0, 4.0, 1.0, 400, 3).unwrap();
        let b = simulate(&p, &cfg).unwrap();
        for i in 0..b.n_paths() {
            assert!(b.variances(i).unwrap().iter().all(|&v| (v - 4.0).abs() < 1e-12));
        }
        // R_T - r0 - mu T ~ N(0, theta T)
        let terminal: Vec<f64> = (0..b.n_paths()).map(|i| b.returns(i)[200] - 1.0 - 0.1).collect();
        let n = terminal.len() as f64;
        let mean = terminal.iter().sum::<f64>() / n;
        let var = terminal.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 3.0 * (8.0 / n).sqrt());
        // sd of sample variance ~ var * sqrt(2/n)
        assert!((var - 8.0).abs() < 4.0 * 8.0 * (2.0 / n).sqrt());
    }

    #[test]
    fn increments_have_requested_correlation() {
        // with V frozen at theta the increments are exactly the scaled normals
        let beta = 0.7;
        let p = HestonParams::unchecked(0.0, 1.0, 1e-9, 0.0, beta);
        let cfg = SimConfig::new(0.01, 1.0, 1.0, 0.0, 50, 11).unwrap();
        let b = simulate(&p, &cfg).unwrap();
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        let mut count = 0.0f64;
        for i in 0..b.n_paths() {
            let r = b.returns(i);
            let v = b.variances(i).unwrap();
            for k in 1..r.len() {
                let x = r[k] - r[k - 1];
                let y = v[k] - v[k - 1];
                sxy += x * y;
                sxx += x * x;
                syy += y * y;
                count += 1.0;
            }
        }
        let corr = sxy / (sxx * syy).sqrt();
        assert!((corr - beta).abs() < 3.0 / count.sqrt(), "corr = {corr}");
    }

    #[test]
    fn holder_zero_increment() {
        let cfg = SimConfig::new(1.0 / 64.0, 1.0, 4.0, 0.0, 20, 5).unwrap();
        let out = holder_scaling_check(&reference(), &cfg, 0.5, &[0.0, 1.0 / 16.0], 2).unwrap();
        assert_eq!(out[0].1, 0.0);
        assert!(out[1].1 > 0.0);
        assert!(holder_scaling_check(&reference(), &cfg, 0.5, &[0.01], 2).is_err());
    }
}
