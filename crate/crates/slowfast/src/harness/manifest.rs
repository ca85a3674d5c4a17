//! Result manifests: config echo, per-file digests, fit summaries, and
//! timings. Files are written through a `.partial` rename so an interrupted
//! run never leaves a truncated file under its final name.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::Result;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, serde::Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    /// Operation that produced every number in the file.
    pub producer: String,
    pub params: BTreeMap<String, String>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ResultManifest {
    pub artifact_version: String,
    pub config: BTreeMap<String, String>,
    pub files: Vec<FileEntry>,
    pub fits: BTreeMap<String, serde_json::Value>,
    pub timings_ms: BTreeMap<String, f64>,
    pub failures: Vec<String>,
}

impl ResultManifest {
    pub fn new(config: BTreeMap<String, String>) -> Self {
        ResultManifest {
            artifact_version: ARTIFACT_VERSION.to_string(),
            config,
            files: Vec::new(),
            fits: BTreeMap::new(),
            timings_ms: BTreeMap::new(),
            failures: Vec::new(),
        }
    }

    /// Write `content` under `out_dir/name` atomically and register its
    /// digest with the producing operation.
    pub fn emit_file(
        &mut self,
        out_dir: &Path,
        name: &str,
        content: &str,
        producer: &str,
        params: BTreeMap<String, String>,
    ) -> Result<()> {
        let path = out_dir.join(name);
        write_atomic(&path, content.as_bytes())?;
        self.files.push(FileEntry {
            path: name.to_string(),
            sha256: sha256_hex(content.as_bytes()),
            producer: producer.to_string(),
            params,
        });
        Ok(())
    }

    pub fn record_fit(&mut self, name: &str, fit: serde_json::Value) {
        self.fits.insert(name.to_string(), fit);
    }

    pub fn record_timing(&mut self, name: &str, millis: f64) {
        self.timings_ms.insert(name.to_string(), millis);
    }

    pub fn record_failure(&mut self, what: impl Into<String>) {
        self.failures.push(what.into());
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join("manifest.json");
        let body = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_atomic(&path, body.as_bytes())?;
        Ok(path)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Write to `<path>.partial`, then rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let partial = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.partial", ext.to_string_lossy()),
        None => "partial".to_string(),
    });
    std::fs::write(&partial, bytes)?;
    std::fs::rename(&partial, path)?;
    Ok(())
}
