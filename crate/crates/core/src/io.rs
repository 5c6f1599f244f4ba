//! Binary instance container with a JSON sidecar.
//!
//! Layout (little endian): magic `SPRGINST`, `u32` version, `n`, `p`, `k` as
//! `u64`, `sigma2` as `f64`, `seed` as `u64`, then `X` row-major, `β*` dense,
//! `W` and `Y`, all `f64`. The sidecar `<path>.json` records the dimensions,
//! seed and an FNV-1a 64 checksum of the binary file.

use std::hash::Hasher;
use std::path::{Path, PathBuf};

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{Dimensions, Instance, SparseVector};
use crate::SCHEMA_VERSION;

const MAGIC: &[u8; 8] = b"SPRGINST";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub schema_version: u32,
    pub dims: Dimensions,
    pub seed: u64,
    pub support: Vec<usize>,
    pub fnv1a64: String,
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn encode_instance(inst: &Instance) -> Vec<u8> {
    let d = inst.dims;
    let mut out = Vec::with_capacity(48 + 8 * (d.n * d.p + d.p + 2 * d.n));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [d.n as u64, d.p as u64, d.k as u64] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&d.sigma2.to_le_bytes());
    out.extend_from_slice(&inst.seed.to_le_bytes());
    let beta = inst.beta_star.to_dense();
    for v in inst.x.as_slice().iter().chain(&beta).chain(&inst.w).chain(&inst.y) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, len: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("instance file is truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let bytes = self.take(count.checked_mul(8).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn decode_instance(bytes: &[u8]) -> Result<Instance> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Format("not an instance file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!("unsupported instance version {version}")));
    }
    let to_usize = |v: u64| usize::try_from(v).map_err(|_| Error::Format("dimension too large".into()));
    let n = to_usize(r.u64()?)?;
    let p = to_usize(r.u64()?)?;
    let k = to_usize(r.u64()?)?;
    let sigma2 = f64::from_le_bytes(r.take(8)?.try_into().unwrap());
    let seed = r.u64()?;
    let dims = Dimensions::new(n, p, k, sigma2)?;
    let x = Matrix::from_row_major(n, p, r.f64s(n.checked_mul(p).ok_or_else(|| Error::Format("size overflow".into()))?)?)?;
    let beta = SparseVector::from_dense(&r.f64s(p)?);
    let w = r.f64s(n)?;
    let y = r.f64s(n)?;
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after instance".into()));
    }
    let inst = Instance::from_parts(dims, x, beta, w, seed)?;
    if inst.y != y {
        return Err(Error::Format("stored Y differs from X*beta_star + W".into()));
    }
    Ok(inst)
}

/// Writes the binary file and its sidecar; returns the checksum.
pub fn write_instance(path: &Path, inst: &Instance) -> Result<u64> {
    let bytes = encode_instance(inst);
    let sum = fnv1a64(&bytes);
    std::fs::write(path, &bytes)?;
    let sidecar = Sidecar {
        schema_version: SCHEMA_VERSION,
        dims: inst.dims,
        seed: inst.seed,
        support: inst.beta_star.support().to_vec(),
        fnv1a64: format!("{sum:016x}"),
    };
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)? + "\n")?;
    Ok(sum)
}

/// Reads an instance, verifying the sidecar checksum when the sidecar exists.
pub fn read_instance(path: &Path) -> Result<Instance> {
    let bytes = std::fs::read(path)?;
    let side = sidecar_path(path);
    if side.exists() {
        let sidecar: Sidecar = serde_json::from_str(&std::fs::read_to_string(&side)?)?;
        let sum = format!("{:016x}", fnv1a64(&bytes));
        if sum != sidecar.fnv1a64 {
            return Err(Error::Format(format!("checksum mismatch: file {sum}, sidecar {}", sidecar.fnv1a64)));
        }
    }
    decode_instance(&bytes)
}
