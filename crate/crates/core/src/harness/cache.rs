//! On-disk cache of incident fields.
//!
//! File layout, little-endian: magic `IRSFIELD`, format version (u32),
//! precision tag (u8: 0 = f32, 1 = f64), point and frequency counts (u64),
//! key length (u32) and key bytes, frequencies (f64), then the point-major
//! samples as interleaved real/imaginary pairs.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::{Complex32, Complex64};

use crate::error::{Error, Result};
use crate::harness::write_atomic;
use crate::wavefield::{FieldStorage, IncidentField};

const MAGIC: &[u8; 8] = b"IRSFIELD";
const VERSION: u32 = 1;

/// Environment variable naming the cache directory.
pub const CACHE_ENV: &str = "IRS_FIELD_CACHE";

pub fn encode_field(field: &IncidentField) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let tag: u8 = match field.storage() {
        FieldStorage::F32(_) => 0,
        FieldStorage::F64(_) => 1,
    };
    out.push(tag);
    out.extend_from_slice(&(field.n_points() as u64).to_le_bytes());
    out.extend_from_slice(&(field.n_freqs() as u64).to_le_bytes());
    out.extend_from_slice(&(field.key().len() as u32).to_le_bytes());
    out.extend_from_slice(field.key().as_bytes());
    for f in field.freqs() {
        out.extend_from_slice(&f.to_le_bytes());
    }
    match field.storage() {
        FieldStorage::F32(v) => v.iter().for_each(|c| {
            out.extend_from_slice(&c.re.to_le_bytes());
            out.extend_from_slice(&c.im.to_le_bytes());
        }),
        FieldStorage::F64(v) => v.iter().for_each(|c| {
            out.extend_from_slice(&c.re.to_le_bytes());
            out.extend_from_slice(&c.im.to_le_bytes());
        }),
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Cache("truncated field cache file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

/// Decodes a cache file. `Ok(None)` when the stored key differs from
/// `expected_key`; header corruption is an error.
pub fn decode_field(bytes: &[u8], expected_key: &str) -> Result<Option<IncidentField>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Cache("bad magic in field cache file".into()));
    }
    let version = u32::from_le_bytes(r.array()?);
    if version != VERSION {
        return Err(Error::Cache(format!(
            "unsupported field cache version {version}"
        )));
    }
    let tag = r.array::<1>()?[0];
    if tag > 1 {
        return Err(Error::Cache(format!("unknown precision tag {tag}")));
    }
    let n_points = u64::from_le_bytes(r.array()?) as usize;
    let n_freqs = u64::from_le_bytes(r.array()?) as usize;
    let key_len = u32::from_le_bytes(r.array()?) as usize;
    let key = std::str::from_utf8(r.take(key_len)?)
        .map_err(|_| Error::Cache("field cache key is not UTF-8".into()))?
        .to_string();
    if key != expected_key {
        return Ok(None);
    }
    let n = n_points
        .checked_mul(n_freqs)
        .ok_or_else(|| Error::Cache("field cache dimensions overflow".into()))?;
    let freqs = r
        .take(8 * n_freqs)?
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let storage = if tag == 0 {
        let raw = r.take(8 * n)?;
        FieldStorage::F32(
            raw.chunks_exact(8)
                .map(|c| {
                    Complex32::new(
                        f32::from_le_bytes(c[..4].try_into().expect("4 bytes")),
                        f32::from_le_bytes(c[4..].try_into().expect("4 bytes")),
                    )
                })
                .collect(),
        )
    } else {
        let raw = r.take(16 * n)?;
        FieldStorage::F64(
            raw.chunks_exact(16)
                .map(|c| {
                    Complex64::new(
                        f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                        f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
                    )
                })
                .collect(),
        )
    };
    if r.pos != bytes.len() {
        return Err(Error::Cache("trailing bytes in field cache file".into()));
    }
    Ok(Some(IncidentField::from_storage(
        n_points, freqs, storage, key,
    )?))
}

/// Directory of cached fields, one file per key.
#[derive(Debug, Clone)]
pub struct FieldCache {
    dir: PathBuf,
}

impl FieldCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// Cache at the directory named by the environment, if set.
    pub fn from_env() -> Option<Self> {
        std::env::var_os(CACHE_ENV)
            .filter(|v| !v.is_empty())
            .map(Self::new)
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.irsfield"))
    }

    pub fn load(&self, key: &str) -> Result<Option<IncidentField>> {
        load_field(&self.path_for(key), key)
    }

    pub fn store(&self, field: &IncidentField) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path_for(field.key());
        cache_field(&path, field)?;
        Ok(path)
    }
}

/// Writes `field` to `path` atomically.
pub fn cache_field(path: &Path, field: &IncidentField) -> Result<()> {
    write_atomic(path, &encode_field(field))
}

/// Reads a cached field; a missing file or a different key is a miss.
pub fn load_field(path: &Path, key: &str) -> Result<Option<IncidentField>> {
    match fs::read(path) {
        Ok(bytes) => decode_field(&bytes, key),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field() -> IncidentField {
        let samples = (0..12)
            .map(|k| Complex64::new(k as f64 * 0.1, -(k as f64).sqrt()))
            .collect();
        let f = IncidentField::from_samples(3, vec![1.0, 2.0, 3.0, 4.0], samples).unwrap();
        IncidentField::from_storage(3, f.freqs().to_vec(), f.storage().clone(), "k1".into())
            .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let f = field();
        let back = decode_field(&encode_field(&f), "k1").unwrap().unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn stale_key_misses() {
        assert!(decode_field(&encode_field(&field()), "other")
            .unwrap()
            .is_none());
    }

    #[test]
    fn corrupted_header_is_an_error() {
        let mut bytes = encode_field(&field());
        bytes[2] ^= 0xff;
        assert!(matches!(decode_field(&bytes, "k1"), Err(Error::Cache(_))));
        let bytes = encode_field(&field());
        assert!(decode_field(&bytes[..bytes.len() - 3], "k1").is_err());
    }

    #[test]
    fn directory_cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FieldCache::new(dir.path());
        assert!(cache.load("k1").unwrap().is_none());
        cache.store(&field()).unwrap();
        assert_eq!(cache.load("k1").unwrap().unwrap(), field());
    }
}
