//! Experiment configuration file, presets and cross-field validation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{EstimatorPlan, EstimatorStudyConfig, LqPlan, LqStudyConfig, SimTemplate};
use crate::params::HestonParams;
use crate::realized::{DeltaRule, JRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    LqConvergence,
    EstimatorConvergence,
    Snapshot,
    AnalyticCheck,
}

impl Study {
    pub fn name(&self) -> &'static str {
        match self {
            Study::LqConvergence => "lq-convergence",
            Study::EstimatorConvergence => "estimator-convergence",
            Study::Snapshot => "snapshot",
            Study::AnalyticCheck => "analytic-check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    #[default]
    Both,
}

impl Format {
    pub fn csv(&self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(&self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    #[serde(default)]
    pub eps: Vec<f64>,
    /// Correlations to sweep; empty means the model's own `beta`.
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default = "default_j_rules")]
    pub j_rules: Vec<JRule>,
    #[serde(default = "default_q")]
    pub q: Vec<u32>,
}

fn default_j_rules() -> Vec<JRule> {
    vec![JRule::Inverse]
}

fn default_q() -> Vec<u32> {
    vec![2, 4]
}

impl Default for Grids {
    fn default() -> Self {
        Self { eps: Vec::new(), beta: Vec::new(), j_rules: default_j_rules(), q: default_q() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    /// Initial variance; defaults to `theta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
    #[serde(default)]
    pub r0: f64,
    pub seed: u64,
    /// Directory for cached path dumps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
}

impl SimSection {
    pub fn template(&self) -> SimTemplate {
        SimTemplate { dt: self.dt, v0: self.v0, r0: self.r0, seed: self.seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqSection {
    #[serde(default = "default_t_eval")]
    pub t_eval: f64,
    #[serde(default = "default_n_blocks")]
    pub n_blocks: usize,
    #[serde(default = "default_block_size")]
    pub block_size: usize,
}

fn default_t_eval() -> f64 {
    1.0
}
fn default_n_blocks() -> usize {
    20
}
fn default_block_size() -> usize {
    500
}

impl Default for LqSection {
    fn default() -> Self {
        Self { t_eval: default_t_eval(), n_blocks: default_n_blocks(), block_size: default_block_size() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    #[serde(default = "default_estimator_j")]
    pub j_rule: JRule,
    #[serde(default = "default_n_scale")]
    pub n_scale: f64,
    #[serde(default = "default_delta")]
    pub delta: DeltaRule,
    #[serde(default = "default_lags")]
    pub lags: Vec<f64>,
    #[serde(default = "default_mc")]
    pub mc: usize,
}

fn default_estimator_j() -> JRule {
    JRule::Inverse
}
fn default_n_scale() -> f64 {
    100.0
}
fn default_delta() -> DeltaRule {
    DeltaRule::SqrtEps
}
fn default_lags() -> Vec<f64> {
    vec![0.6]
}
fn default_mc() -> usize {
    200
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self {
            j_rule: default_estimator_j(),
            n_scale: default_n_scale(),
            delta: default_delta(),
            lags: default_lags(),
            mc: default_mc(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotSection {
    /// Index of the simulated path.
    #[serde(default)]
    pub path: u64,
    /// Spacing of the emitted time grid.
    #[serde(default = "default_snapshot_delta")]
    pub delta: f64,
    #[serde(default = "default_t_eval")]
    pub horizon: f64,
}

fn default_snapshot_delta() -> f64 {
    1e-3
}

impl Default for SnapshotSection {
    fn default() -> Self {
        Self { path: 0, delta: default_snapshot_delta(), horizon: default_t_eval() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: Format,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_out_dir(), format: Format::default() }
    }
}

/// Full description of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub study: Study,
    pub model: HestonParams,
    #[serde(default)]
    pub grids: Grids,
    pub sim: SimSection,
    #[serde(default)]
    pub lq: LqSection,
    #[serde(default)]
    pub estimator: EstimatorSection,
    #[serde(default)]
    pub snapshot: SnapshotSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes to TOML")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The model at each requested correlation.
    pub fn models(&self) -> Result<Vec<HestonParams>> {
        let base = self.model.validated()?;
        if self.grids.beta.is_empty() {
            return Ok(vec![base]);
        }
        self.grids.beta.iter().map(|&b| base.with_beta(b)).collect()
    }

    pub fn lq_study(&self, params: HestonParams) -> LqStudyConfig {
        LqStudyConfig {
            params,
            eps_grid: self.grids.eps.clone(),
            j_rules: self.grids.j_rules.clone(),
            q_list: self.grids.q.clone(),
            t_eval: self.lq.t_eval,
            n_blocks: self.lq.n_blocks,
            block_size: self.lq.block_size,
            sim: self.sim.template(),
        }
    }

    pub fn estimator_study(&self, params: HestonParams) -> EstimatorStudyConfig {
        EstimatorStudyConfig {
            params,
            eps_grid: self.grids.eps.clone(),
            j_rule: self.estimator.j_rule,
            n_scale: self.estimator.n_scale,
            delta_rule: self.estimator.delta,
            lags: self.estimator.lags.clone(),
            mc: self.estimator.mc,
            sim: self.sim.template(),
        }
    }

    /// Checks every cross-field rule of `study` without simulating anything.
    pub fn validate_for(&self, study: Study) -> Result<Validated> {
        if !(self.sim.dt > 0.0) || !self.sim.dt.is_finite() {
            return Err(Error::Config(format!("dt must be positive, got {}", self.sim.dt)));
        }
        let models = self.models()?;
        match study {
            Study::LqConvergence => {
                let plans = models.iter().map(|&p| self.lq_study(p).plan()).collect::<Result<_>>()?;
                Ok(Validated::Lq(plans))
            }
            Study::EstimatorConvergence => {
                let plans = models.iter().map(|&p| self.estimator_study(p).plan()).collect::<Result<_>>()?;
                Ok(Validated::Estimator(plans))
            }
            Study::Snapshot => {
                let plans = models
                    .iter()
                    .map(|&p| super::snapshot::SnapshotPlan::new(p, self))
                    .collect::<Result<_>>()?;
                Ok(Validated::Snapshot(plans))
            }
            Study::AnalyticCheck => Ok(Validated::Analytic(models)),
        }
    }
}

/// A configuration that passed validation, with its per-correlation plans.
#[derive(Debug, Clone)]
pub enum Validated {
    Lq(Vec<LqPlan>),
    Estimator(Vec<EstimatorPlan>),
    Snapshot(Vec<super::snapshot::SnapshotPlan>),
    Analytic(Vec<HestonParams>),
}

pub const PRESET_NAMES: [&str; 7] = [
    "desk-default",
    "desk-estimator",
    "paper-9.2",
    "paper-inverse-square",
    "paper-estimator",
    "snapshot",
    "analytic-check",
];

fn reference_model() -> HestonParams {
    HestonParams { kappa: 1.7, theta: 4.0, gamma: 2.0, mu: 0.05, beta: 0.0 }
}

fn sim(dt: f64) -> SimSection {
    SimSection { dt, v0: None, r0: 0.0, seed: 20_240_917, cache: None }
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let base = |study, eps: Vec<f64>, dt| ExperimentConfig {
        study,
        model: reference_model(),
        grids: Grids { eps, ..Grids::default() },
        sim: sim(dt),
        lq: LqSection::default(),
        estimator: EstimatorSection::default(),
        snapshot: SnapshotSection::default(),
        output: OutputSection::default(),
    };
    let three_rules = vec![JRule::Constant(10), JRule::Constant(40), JRule::Inverse];
    let cfg = match name {
        "desk-default" => {
            let mut c = base(Study::LqConvergence, vec![0.1, 0.05, 0.02, 0.01], 1e-5);
            c.grids.beta = vec![0.0, 0.3, 0.7];
            c.grids.j_rules = three_rules;
            c
        }
        "desk-estimator" => base(Study::EstimatorConvergence, vec![0.1, 0.05, 0.02], 1e-4),
        "paper-9.2" => {
            let mut c = base(Study::LqConvergence, vec![0.1, 0.05, 0.04, 0.02, 0.01, 0.008, 0.005, 0.004], 1e-6);
            c.grids.beta = vec![0.0, 0.3, 0.7];
            c.grids.j_rules = three_rules;
            c.lq = LqSection { t_eval: 1.0, n_blocks: 200, block_size: 1000 };
            c
        }
        "paper-inverse-square" => {
            let mut c = base(Study::LqConvergence, vec![0.1, 0.05, 0.02, 0.01, 0.005], 1.25e-7);
            c.grids.beta = vec![0.0, 0.3, 0.7];
            c.grids.j_rules = vec![JRule::InverseSquare];
            c.lq = LqSection { t_eval: 1.0, n_blocks: 200, block_size: 1000 };
            c
        }
        "paper-estimator" => {
            let mut c = base(Study::EstimatorConvergence, vec![0.1, 0.05, 0.02, 0.01, 0.005], 1e-6);
            c.estimator.mc = 1000;
            c
        }
        "snapshot" => {
            let mut c = base(Study::Snapshot, vec![0.01], 1e-6);
            c.grids.j_rules = vec![JRule::Constant(10), JRule::Constant(40), JRule::Inverse, JRule::InverseSquare];
            c
        }
        "analytic-check" => base(Study::AnalyticCheck, Vec::new(), 1e-3),
        other => {
            return Err(Error::Config(format!(
                "unknown preset '{other}' (known: {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(cfg)
}
