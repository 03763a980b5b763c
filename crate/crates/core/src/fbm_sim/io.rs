//! Path file formats.
//!
//! Binary layout, all little-endian:
//!
//! | bytes | field |
//! |-------|-------|
//! | 4     | magic `FBMP` |
//! | 4     | version (u32) |
//! | 8     | H (f64) |
//! | 8     | d (u64) |
//! | 8     | n_steps (u64) |
//! | 8     | n_paths (u64) |
//! | 8     | dt (f64) |
//! | 8     | seed (u64) |
//!
//! followed by `n_paths * (n_steps + 1) * d` f64 values, row-major
//! (path, node, coordinate).

use std::io::{Read, Write};

use super::PathBatch;
use crate::error::{DsltError, Result};

pub const PATH_FILE_MAGIC: &[u8; 4] = b"FBMP";
pub const PATH_FILE_VERSION: u32 = 1;

pub fn write_paths<W: Write>(batch: &PathBatch, mut w: W) -> Result<()> {
    w.write_all(PATH_FILE_MAGIC)?;
    w.write_all(&PATH_FILE_VERSION.to_le_bytes())?;
    w.write_all(&batch.hurst.to_le_bytes())?;
    w.write_all(&(batch.dim as u64).to_le_bytes())?;
    w.write_all(&(batch.n_steps as u64).to_le_bytes())?;
    w.write_all(&(batch.n_paths as u64).to_le_bytes())?;
    w.write_all(&batch.dt.to_le_bytes())?;
    w.write_all(&batch.seed.to_le_bytes())?;
    let mut buf = Vec::with_capacity(batch.values.len() * 8);
    for v in &batch.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    read_u64(r).map(f64::from_bits)
}

pub fn read_paths<R: Read>(mut r: R) -> Result<PathBatch> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != PATH_FILE_MAGIC {
        return Err(DsltError::Format(format!("bad magic {magic:?}")));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    let version = u32::from_le_bytes(v);
    if version != PATH_FILE_VERSION {
        return Err(DsltError::Format(format!("unsupported version {version}")));
    }
    let hurst = read_f64(&mut r)?;
    let dim = read_u64(&mut r)? as usize;
    let n_steps = read_u64(&mut r)? as usize;
    let n_paths = read_u64(&mut r)? as usize;
    let dt = read_f64(&mut r)?;
    let seed = read_u64(&mut r)?;
    let count = n_paths
        .checked_mul(n_steps + 1)
        .and_then(|x| x.checked_mul(dim))
        .ok_or_else(|| DsltError::Format("header sizes overflow".into()))?;
    let mut raw = vec![0u8; count * 8];
    r.read_exact(&mut raw)?;
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(PathBatch { hurst, dim, n_paths, n_steps, dt, seed, values })
}

/// CSV export: one row per grid point, columns `path_id,t,x_1..x_d`.
pub fn write_paths_csv<W: Write>(batch: &PathBatch, mut w: W) -> Result<()> {
    let mut header = String::from("path_id,t");
    for i in 1..=batch.dim {
        header.push_str(&format!(",x_{i}"));
    }
    writeln!(w, "{header}")?;
    for p in 0..batch.n_paths {
        for j in 0..=batch.n_steps {
            write!(w, "{},{}", p, j as f64 * batch.dt)?;
            for c in 0..batch.dim {
                write!(w, ",{}", batch.value(p, j, c))?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}
