//! Command-line front end: configuration, study orchestration and artifacts.

pub mod analytic;
pub mod cache;
pub mod config;
pub mod output;
pub mod snapshot;

use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::error::{Error, Result};
use crate::experiments::{
    estimator_error_study_with, estimator_rows, lq_error_study_with, lq_rows, write_rows_csv, ObservationSource,
    ReplicateSource, SimulatedObservations, SimulatedReplicates,
};
use analytic::{analytic_checks, write_checks, CHECK_HEADER};
use cache::{CachedObservations, CachedReplicates};
use config::{preset, ExperimentConfig, Format, Study, Validated, PRESET_NAMES};
use output::{write_artifacts, Artifact, Manifest};
use snapshot::{run_snapshot, write_snapshot_rows, SNAPSHOT_HEADER};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "heston-rv", version, about = "Heston realized-volatility experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Experiment configuration file (TOML).
    #[arg(long, global = true, env = "HESTON_RV_CONFIG")]
    pub config: Option<PathBuf>,

    /// Named preset used when no configuration file is given.
    #[arg(long, global = true, env = "HESTON_RV_PRESET")]
    pub preset: Option<String>,

    /// Output directory, overriding the configuration.
    #[arg(long, global = true, env = "HESTON_RV_OUT")]
    pub out: Option<PathBuf>,

    /// Base seed, overriding the configuration.
    #[arg(long, global = true, env = "HESTON_RV_SEED")]
    pub seed: Option<u64>,

    /// Maximum number of worker threads.
    #[arg(long, global = true, env = "HESTON_RV_JOBS")]
    pub jobs: Option<usize>,

    /// Artifact formats, overriding the configuration.
    #[arg(long, global = true, value_enum, env = "HESTON_RV_FORMAT")]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Run the study named in the configuration.
    Run,
    /// Emit single-path V / Y trajectories.
    Snapshot,
    /// Verify closed-form identities by quadrature.
    AnalyticCheck,
    /// Print preset configurations as TOML.
    PrintPresets {
        /// Print only this preset.
        name: Option<String>,
    },
}

/// Files written by a successful run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_config() {
        EXIT_CONFIG
    } else {
        EXIT_RUNTIME
    }
}

/// Machine-readable error description for stderr.
pub fn error_report(err: &Error) -> String {
    json!({ "error": err.kind(), "message": err.to_string(), "exit_code": exit_code(err) }).to_string()
}

/// Base configuration with command-line overrides applied.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) if matches!(cli.command, Command::AnalyticCheck) => preset("analytic-check")?,
        (None, None) => return Err(Error::Config("either --config or --preset is required".into())),
    };
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.sim.seed = seed;
    }
    if let Some(format) = cli.format {
        cfg.output.format = format;
    }
    Ok(cfg)
}

pub fn print_presets(name: Option<&str>) -> Result<String> {
    let names: Vec<&str> = match name {
        Some(n) => vec![n],
        None => PRESET_NAMES.to_vec(),
    };
    let mut text = String::new();
    for n in names {
        let cfg = preset(n)?;
        text.push_str(&format!("# preset: {n}\n{}\n", cfg.to_toml()));
    }
    Ok(text)
}

pub fn execute(cli: &Cli) -> Result<Option<RunOutcome>> {
    let study = match &cli.command {
        Command::PrintPresets { name } => {
            print!("{}", print_presets(name.as_deref())?);
            return Ok(None);
        }
        Command::Run => None,
        Command::Snapshot => Some(Study::Snapshot),
        Command::AnalyticCheck => Some(Study::AnalyticCheck),
    };
    let cfg = resolve_config(cli)?;
    let study = study.unwrap_or(cfg.study);
    run_study(&cfg, study, cli.jobs).map(Some)
}

/// Validates, computes and writes all artifacts of one study.
pub fn run_study(cfg: &ExperimentConfig, study: Study, jobs: Option<usize>) -> Result<RunOutcome> {
    let validated = cfg.validate_for(study)?;
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);

    let (mut artifacts, summary, threads, failure) = match jobs {
        Some(0) => return Err(Error::Config("--jobs must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
            let r = pool.install(|| compute(cfg, study, &validated))?;
            (r.0, r.1, n, r.2)
        }
        None => {
            let r = compute(cfg, study, &validated)?;
            (r.0, r.1, rayon::current_num_threads(), r.2)
        }
    };

    let mut files: Vec<String> = artifacts.iter().map(|a| a.name.clone()).collect();
    files.push("manifest.json".into());
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        study: study.name(),
        seed: cfg.sim.seed,
        jobs,
        threads,
        started_unix_seconds: started_unix,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        files: files.clone(),
        summary,
        config: cfg,
    };
    artifacts.push(Artifact { name: "manifest.json".into(), bytes: pretty_json(&manifest)? });
    write_artifacts(&cfg.output.dir, &artifacts)?;
    if let Some(msg) = failure {
        return Err(Error::Domain(msg));
    }
    Ok(RunOutcome { dir: cfg.output.dir.clone(), files })
}

fn pretty_json<T: serde::Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    Ok(bytes)
}

type Computed = (Vec<Artifact>, serde_json::Value, Option<String>);

fn compute(cfg: &ExperimentConfig, study: Study, validated: &Validated) -> Result<Computed> {
    let stem = study.name().replace('-', "_");
    let format = cfg.output.format;
    let mut artifacts = Vec::new();
    let mut push = |ext: &str, bytes: Vec<u8>| artifacts.push(Artifact { name: format!("{stem}.{ext}"), bytes });
    let mut failure = None;

    let summary = match validated {
        Validated::Lq(plans) => {
            let source: Box<dyn ObservationSource> = match &cfg.sim.cache {
                Some(dir) => Box::new(CachedObservations { dir: dir.clone() }),
                None => Box::new(SimulatedObservations),
            };
            let mut reports = Vec::with_capacity(plans.len());
            for plan in plans {
                log::info!("lq study at beta = {}", plan.config.params.beta);
                reports.push(lq_error_study_with(&plan.config, source.as_ref())?);
            }
            let rows: Vec<_> = reports.iter().flat_map(lq_rows).collect();
            if format.csv() {
                let mut buf = Vec::new();
                write_rows_csv(&rows, &mut buf)?;
                push("csv", buf);
            }
            if format.json() {
                push("json", pretty_json(&json!({ "study": study.name(), "config": cfg, "results": reports }))?);
            }
            let slopes: Vec<_> = reports
                .iter()
                .flat_map(|r| {
                    r.slopes.iter().map(move |s| {
                        json!({ "beta": r.config.params.beta, "j_rule": s.j_rule, "q": s.q, "slope": s.fit.slope })
                    })
                })
                .collect();
            json!({ "slopes": slopes })
        }
        Validated::Estimator(plans) => {
            let source: Box<dyn ReplicateSource> = match &cfg.sim.cache {
                Some(dir) => Box::new(CachedReplicates { dir: dir.clone() }),
                None => Box::new(SimulatedReplicates),
            };
            let mut reports = Vec::with_capacity(plans.len());
            for plan in plans {
                log::info!("estimator study at beta = {}", plan.config.params.beta);
                reports.push(estimator_error_study_with(&plan.config, source.as_ref())?);
            }
            let rows: Vec<_> = reports.iter().flat_map(estimator_rows).collect();
            if format.csv() {
                let mut buf = Vec::new();
                write_rows_csv(&rows, &mut buf)?;
                push("csv", buf);
            }
            if format.json() {
                push("json", pretty_json(&json!({ "study": study.name(), "config": cfg, "results": reports }))?);
            }
            let slopes: Vec<_> = reports
                .iter()
                .flat_map(|r| {
                    r.slopes.iter().map(move |s| {
                        json!({ "beta": r.config.params.beta, "quantity": s.quantity, "slope": s.fit.slope })
                    })
                })
                .collect();
            let degenerate: usize = reports.iter().flat_map(|r| r.entries.iter().map(|e| e.degenerate)).sum();
            json!({ "slopes": slopes, "degenerate_replicates": degenerate })
        }
        Validated::Snapshot(plans) => {
            let snaps = plans.iter().map(run_snapshot).collect::<Result<Vec<_>>>()?;
            let diagnostics: Vec<_> = snaps.iter().flat_map(|s| s.diagnostics.clone()).collect();
            if format.csv() {
                let mut buf = format!("{SNAPSHOT_HEADER}\n").into_bytes();
                for s in &snaps {
                    write_snapshot_rows(s, &mut buf)?;
                }
                push("csv", buf);
            }
            if format.json() {
                push("json", pretty_json(&json!({ "study": study.name(), "config": cfg, "diagnostics": diagnostics }))?);
            }
            json!({ "path": cfg.snapshot.path, "diagnostics": diagnostics })
        }
        Validated::Analytic(models) => {
            let mut all = Vec::new();
            let mut buf = format!("{CHECK_HEADER}\n").into_bytes();
            for p in models {
                let checks = analytic_checks(p)?;
                write_checks(p.beta, &checks, &mut buf)?;
                all.push(json!({ "beta": p.beta, "checks": checks }));
                let failed: Vec<_> = checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
                if !failed.is_empty() {
                    failure = Some(format!("analytic checks failed: {}", failed.join(", ")));
                }
            }
            if format.csv() {
                push("csv", buf);
            }
            if format.json() {
                push("json", pretty_json(&json!({ "study": study.name(), "config": cfg, "results": all }))?);
            }
            json!({
                "feller_ratio": cfg.model.feller_ratio(),
                "all_pass": failure.is_none(),
            })
        }
    };
    Ok((artifacts, summary, failure))
}
