//! Atomic artifact writing and the run manifest.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::config::ExperimentConfig;
use crate::error::Result;

/// A file to be written into the output directory.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Writes every artifact through a temporary file in the target directory
/// followed by a rename, so readers never see a truncated file.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for a in artifacts {
        write_atomic(&dir.join(&a.name), &a.bytes)?;
    }
    Ok(())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub study: &'static str,
    pub seed: u64,
    /// Worker cap requested on the command line, if any.
    pub jobs: Option<usize>,
    pub threads: usize,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub files: Vec<String>,
    pub summary: serde_json::Value,
    pub config: &'a ExperimentConfig,
}
