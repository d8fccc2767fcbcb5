//! JSON persistence of noise tables, keyed by a hash of the coherence matrix.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::RealMatrix;

use super::patterns::check_m;
use super::tables::NoiseTables;

pub const TABLE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TableFile {
    format_version: u32,
    m: usize,
    coherence_sha256: String,
    /// Row-major 2m×2m coherence matrix.
    c: Vec<f64>,
    o: Vec<f64>,
    d: Vec<Vec<f64>>,
    tol: f64,
}

fn row_major(c: &RealMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(c.nrows() * c.ncols());
    for i in 0..c.nrows() {
        for j in 0..c.ncols() {
            out.push(c[(i, j)]);
        }
    }
    out
}

/// SHA-256 of the little-endian row-major bytes of `c`.
pub fn coherence_hash(c: &RealMatrix) -> String {
    let mut h = Sha256::new();
    for v in row_major(c) {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

pub fn save_noise_tables(tables: &NoiseTables, path: &Path) -> Result<()> {
    let file = TableFile {
        format_version: TABLE_FORMAT_VERSION,
        m: tables.m,
        coherence_sha256: coherence_hash(&tables.c),
        c: row_major(&tables.c),
        o: tables.o.clone(),
        d: tables.d.clone(),
        tol: tables.tol,
    };
    let text = serde_json::to_string(&file).map_err(|e| Error::TableFormat(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

/// Loads tables and checks they were built for `expected` (when given).
pub fn load_noise_tables(path: &Path, expected: Option<&RealMatrix>) -> Result<NoiseTables> {
    let text = fs::read_to_string(path)?;
    let file: TableFile = serde_json::from_str(&text).map_err(|e| Error::TableFormat(e.to_string()))?;
    if file.format_version != TABLE_FORMAT_VERSION {
        return Err(Error::TableFormat(format!("unsupported format version {}", file.format_version)));
    }
    check_m(file.m).map_err(|e| Error::TableFormat(e.to_string()))?;
    let k = 2 * file.m;
    let kappa = 1usize << k;
    if file.c.len() != k * k || file.o.len() != kappa || file.d.len() != kappa || file.d.iter().any(|d| d.len() != k) {
        return Err(Error::TableFormat("table sizes do not match m".into()));
    }
    let c = RealMatrix::from_row_slice(k, k, &file.c);
    if coherence_hash(&c) != file.coherence_sha256 {
        return Err(Error::TableFormat("coherence hash does not match stored matrix".into()));
    }
    if let Some(e) = expected {
        if e.shape() != c.shape() || coherence_hash(e) != file.coherence_sha256 {
            return Err(Error::TableFormat("tables were built for a different coherence matrix".into()));
        }
    }
    Ok(NoiseTables {
        m: file.m,
        c,
        o: file.o,
        d: file.d,
        tol: file.tol,
    })
}
