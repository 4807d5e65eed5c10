//! Scenario files, the field cache and the experiment runner.

pub mod cache;
pub mod runner;
pub mod scenario;

use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::Result;

pub use cache::{cache_field, load_field, FieldCache, CACHE_ENV};
pub use runner::{run_scenario, Artifact, Manifest, RunOptions, RunSummary};
pub use scenario::{load_scenario, parse_scenario, validate_scenario, Scenario};

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
