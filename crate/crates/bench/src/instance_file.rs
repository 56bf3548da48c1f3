//! Self-describing binary instance files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes   b"NZSINST\0"
//! version  u32
//! meta_len u64
//! meta     meta_len bytes of UTF-8 JSON (InstanceMeta)
//! offsets  (m + 1) x u64
//! columns  nnz x u64
//! values   nnz x f64
//! ```
//!
//! The matrix is stored before any transaction fee; `rho` in the metadata is
//! always null so one file serves a whole fee sweep.

use std::path::Path;

use nzs_core::instances::SparseExperiment;
use nzs_core::vecmat::SparseMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BenchError, Result};

pub const MAGIC: &[u8; 8] = b"NZSINST\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub n: usize,
    pub m: usize,
    pub nnz: usize,
    pub seed: u64,
    pub mu: f64,
    pub nu: f64,
    pub normalized: bool,
    /// Spectral norm before normalization.
    pub raw_norm: f64,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct InstanceFile {
    pub meta: InstanceMeta,
    pub matrix: SparseMatrix,
}

impl InstanceFile {
    pub fn from_experiment(e: &SparseExperiment, normalized: bool) -> Self {
        InstanceFile {
            meta: InstanceMeta {
                n: e.n,
                m: e.m,
                nnz: e.matrix.nnz(),
                seed: e.seed,
                mu: e.mu,
                nu: e.nu,
                normalized,
                raw_norm: e.raw_norm,
                rho: None,
            },
            matrix: e.matrix.clone(),
        }
    }

    pub fn experiment(&self) -> SparseExperiment {
        SparseExperiment {
            matrix: self.matrix.clone(),
            n: self.meta.n,
            m: self.meta.m,
            nnz: self.meta.nnz,
            seed: self.meta.seed,
            mu: self.meta.mu,
            nu: self.meta.nu,
            raw_norm: self.meta.raw_norm,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_vec(&self.meta).map_err(|e| BenchError::Format(e.to_string()))?;
        let mat = &self.matrix;
        let mut out = Vec::with_capacity(24 + meta.len() + 8 * (mat.n_rows() + 1 + 2 * mat.nnz()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        for &o in mat.row_offsets() {
            out.extend_from_slice(&(o as u64).to_le_bytes());
        }
        for &c in mat.col_indices() {
            out.extend_from_slice(&(c as u64).to_le_bytes());
        }
        for &v in mat.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(BenchError::Format("bad magic".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(BenchError::Format(format!("unsupported version {version}")));
        }
        let meta_len = r.u64()? as usize;
        let meta: InstanceMeta = serde_json::from_slice(r.take(meta_len)?)
            .map_err(|e| BenchError::Format(format!("metadata: {e}")))?;
        let offsets = (0..=meta.m).map(|_| r.u64().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let nnz = *offsets.last().expect("m + 1 offsets");
        if nnz != meta.nnz {
            return Err(BenchError::Format(format!("metadata nnz {} but {} stored", meta.nnz, nnz)));
        }
        let cols = (0..nnz).map(|_| r.u64().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let values = (0..nnz).map(|_| r.u64().map(f64::from_bits)).collect::<Result<Vec<_>>>()?;
        if r.pos != bytes.len() {
            return Err(BenchError::Format("trailing bytes".into()));
        }
        let matrix = SparseMatrix::new(meta.m, meta.n, offsets, cols, values)?;
        Ok(InstanceFile { meta, matrix })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| BenchError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| BenchError::Format("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
