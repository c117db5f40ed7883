//! Binary path dump used for caching between CLI stages.
//!
//! Layout, all little-endian: magic `HSTP`, version `u32`, `n_paths u64`,
//! `n_steps u64` (samples per path), `dt f64` (sample spacing), `seed u64`;
//! then, per path, `n_steps` return samples followed by `n_steps` variance
//! samples when variances were stored. Variance presence follows from the
//! payload length.

use std::io::{Read, Write};

use super::{PathBundle, Provenance, TimeGrid};
use crate::error::{Error, Result};

pub const DUMP_MAGIC: &[u8; 4] = b"HSTP";
pub const DUMP_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DumpHeader {
    pub version: u32,
    pub n_paths: u64,
    pub n_steps: u64,
    pub dt: f64,
    pub seed: u64,
}

pub fn write_dump<W: Write>(bundle: &PathBundle, mut out: W) -> Result<()> {
    let n = bundle.grid.len;
    out.write_all(DUMP_MAGIC)?;
    out.write_all(&DUMP_VERSION.to_le_bytes())?;
    out.write_all(&(bundle.n_paths() as u64).to_le_bytes())?;
    out.write_all(&(n as u64).to_le_bytes())?;
    out.write_all(&bundle.grid.spacing.to_le_bytes())?;
    out.write_all(&bundle.provenance.seed.to_le_bytes())?;
    let mut buf = Vec::with_capacity(n * 16);
    for i in 0..bundle.n_paths() {
        buf.clear();
        for x in bundle.returns(i) {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        if let Some(v) = bundle.variances(i) {
            for x in v {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a dump back into a bundle. The grid origin and the first path index are
/// not part of the format, so the caller supplies them.
pub fn read_dump<R: Read>(mut input: R, t0: f64, first_path: u64, sim_dt: f64) -> Result<(DumpHeader, PathBundle)> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN || &bytes[..4] != DUMP_MAGIC {
        return Err(Error::Format("missing HSTP header".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let header = DumpHeader {
        version: u32_at(4),
        n_paths: u64_at(8),
        n_steps: u64_at(16),
        dt: f64::from_bits(u64_at(24)),
        seed: u64_at(32),
    };
    if header.version != DUMP_VERSION {
        return Err(Error::Format(format!("unsupported dump version {}", header.version)));
    }
    let payload = &bytes[HEADER_LEN..];
    let row = header.n_steps as usize * 8;
    let rows = header.n_paths as usize;
    let with_v = if payload.len() == rows * row {
        false
    } else if payload.len() == rows * row * 2 {
        true
    } else {
        return Err(Error::Format(format!(
            "payload of {} bytes does not match {} paths x {} samples",
            payload.len(),
            rows,
            header.n_steps
        )));
    };
    let floats = |chunk: &[u8]| -> Vec<f64> {
        chunk.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()
    };
    let stride = if with_v { 2 * row } else { row };
    let mut returns = Vec::with_capacity(rows * header.n_steps as usize);
    let mut variances = with_v.then(|| Vec::with_capacity(rows * header.n_steps as usize));
    for p in payload.chunks_exact(stride) {
        returns.extend(floats(&p[..row]));
        if let Some(v) = variances.as_mut() {
            v.extend(floats(&p[row..]));
        }
    }
    let bundle = PathBundle::from_parts(
        TimeGrid { t0, spacing: header.dt, len: header.n_steps as usize },
        Provenance { seed: header.seed, first_path, n_paths: header.n_paths, dt: sim_dt },
        returns,
        variances,
    )?;
    Ok((header, bundle))
}
