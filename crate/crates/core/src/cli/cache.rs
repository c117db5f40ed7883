//! On-disk cache of simulated path bundles keyed by a content hash.

use std::fs::File;
use std::io::BufReader;
use std::ops::Range;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::output::write_atomic;
use crate::error::Result;
use crate::estimators::{empirical_moments, MomentEstimates};
use crate::experiments::{EstimatorPlan, LqPlan, ObservationSource, ReplicateSource};
use crate::params::HestonParams;
use crate::realized::realized_series;
use crate::sim::{read_dump, simulate, write_dump, PathBundle, SimConfig};

/// Hex SHA-256 of the parameters and the full simulation settings (seed included).
pub fn cache_key(params: &HestonParams, cfg: &SimConfig) -> String {
    let text = serde_json::to_string(&(env!("CARGO_PKG_VERSION"), params, cfg)).expect("serializable key");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Reads the bundle for `(params, cfg)` from `dir`, simulating and storing it on a miss.
pub fn load_or_simulate(dir: &Path, params: &HestonParams, cfg: &SimConfig) -> Result<PathBundle> {
    let path = dir.join(format!("{}.hstp", cache_key(params, cfg)));
    if path.exists() {
        let (_, bundle) = read_dump(BufReader::new(File::open(&path)?), cfg.grid()?.t0, cfg.first_path, cfg.dt)?;
        log::debug!("cache hit {}", path.display());
        return Ok(bundle);
    }
    let bundle = simulate(params, cfg)?;
    std::fs::create_dir_all(dir)?;
    let mut bytes = Vec::new();
    write_dump(&bundle, &mut bytes)?;
    write_atomic(&path, &bytes)?;
    Ok(bundle)
}

/// L^q observations served from cached blocks.
pub struct CachedObservations {
    pub dir: PathBuf,
}

impl ObservationSource for CachedObservations {
    fn observe_block(&self, plan: &LqPlan, paths: Range<u64>) -> Result<Vec<Vec<(f64, f64)>>> {
        let cfg = plan.sim.clone().with_paths(paths.start, paths.end - paths.start);
        let bundle = load_or_simulate(&self.dir, &plan.config.params, &cfg)?;
        plan.observe_bundle(&bundle)
    }
}

/// Estimator replicates served from cached single-path bundles.
pub struct CachedReplicates {
    pub dir: PathBuf,
}

impl ReplicateSource for CachedReplicates {
    fn moments(&self, plan: &EstimatorPlan, eps_index: usize, replicate: u64) -> Result<MomentEstimates> {
        let ep = &plan.eps[eps_index];
        let cfg = ep.sim.clone().with_paths(replicate, 1);
        let bundle = load_or_simulate(&self.dir, &plan.config.params, &cfg)?;
        let series = realized_series(&bundle, replicate, &ep.scheme)?;
        empirical_moments(&series, &plan.config.lags)
    }
}
