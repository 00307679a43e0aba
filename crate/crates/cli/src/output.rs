use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<String> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp =
        tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(sha256_hex(bytes))
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance of one run, written next to its primary output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Digest of the resolved experiment settings.
    pub spec_sha256: String,
    /// Digest of the canonical class file the run used.
    pub class_sha256: String,
    pub reference: Option<String>,
    pub max_n: Option<usize>,
    pub seed: Option<u64>,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<OutputDigest>,
}

impl RunManifest {
    pub fn new(command: &str, spec_sha256: String, class_sha256: String) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            command: command.to_owned(),
            spec_sha256,
            class_sha256,
            reference: None,
            max_n: None,
            seed: None,
            parameters: BTreeMap::new(),
            started_unix: unix_now(),
            finished_unix: 0,
            outputs: Vec::new(),
        }
    }

    pub fn record(&mut self, path: &Path, sha256: String) {
        self.outputs.push(OutputDigest { path: path.display().to_string(), sha256 });
    }

    /// `<out>.manifest.json`
    pub fn path_for(out: &Path) -> std::path::PathBuf {
        let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        out.with_file_name(name)
    }

    pub fn write_next_to(mut self, out: &Path) -> Result<()> {
        self.finished_unix = unix_now();
        let json = serde_json::to_string_pretty(&self)? + "\n";
        write_atomic(&Self::path_for(out), json.as_bytes())?;
        Ok(())
    }

    pub fn load_for(out: &Path) -> Result<Option<RunManifest>> {
        let path = Self::path_for(out);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let manifest = serde_json::from_str(&text)
            .map_err(|e| mixpred_core::Error::InvalidInput(format!("{}: {e}", path.display())))?;
        Ok(Some(manifest))
    }
}
