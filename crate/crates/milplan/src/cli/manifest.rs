//! Run manifests. Every subcommand writes one next to its outputs: the
//! exact invocation, the resolved parameters, every seed, the schema
//! versions in play, and a digest per artifact. Repeating the invocation
//! must reproduce the digests — wall-clock fields are stripped before
//! hashing so the guarantee covers exactly the deterministic surface
//! (node counts, datasets, model parameters, proxy metrics).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST_VERSION: u32 = 1;

/// JSON keys holding wall-clock measurements, stripped recursively before
/// an artifact is hashed. `elapsed` covers incumbent traces, `solve_time`
/// run records, `wall_time` raw solver results.
const CLOCK_KEYS: &[&str] = &["elapsed", "solve_time", "wall_time", "created_unix"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    /// Subcommand that ran.
    pub command: String,
    /// Resolved parameters after defaulting, flag name → value.
    pub parameters: BTreeMap<String, String>,
    /// Every RNG seed that entered the run.
    pub seeds: BTreeMap<String, u64>,
    /// Schema versions of the formats touched.
    pub schema_versions: BTreeMap<String, u32>,
    /// Output file name → sha256 of its deterministic content.
    pub artifact_hashes: BTreeMap<String, String>,
    /// Seconds since the epoch; informational only, excluded from hashing
    /// and from reproducibility comparisons.
    pub created_unix: u64,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            manifest_version: MANIFEST_VERSION,
            command: command.to_string(),
            parameters: BTreeMap::new(),
            seeds: BTreeMap::new(),
            schema_versions: BTreeMap::new(),
            artifact_hashes: BTreeMap::new(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    pub fn seed(&mut self, key: &str, value: u64) -> &mut Self {
        self.seeds.insert(key.to_string(), value);
        self
    }

    pub fn schema(&mut self, key: &str, version: u32) -> &mut Self {
        self.schema_versions.insert(key.to_string(), version);
        self
    }

    /// Digest one output file and record it under its file name (relative
    /// to the manifest's directory where possible).
    pub fn artifact(&mut self, path: &Path) -> std::io::Result<&mut Self> {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let digest = hash_artifact(path)?;
        self.artifact_hashes.insert(name, digest);
        Ok(self)
    }

    /// Digest every file under `dir` (recursively), keyed by relative path.
    pub fn artifact_tree(&mut self, dir: &Path) -> std::io::Result<&mut Self> {
        let mut files = Vec::new();
        walk(dir, &mut files)?;
        files.sort();
        for file in files {
            let key = file
                .strip_prefix(dir)
                .unwrap_or(&file)
                .to_string_lossy()
                .into_owned();
            let digest = hash_artifact(&file)?;
            self.artifact_hashes.insert(key, digest);
        }
        Ok(self)
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serialization cannot fail");
        fs::write(path, text + "\n")
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// Manifest location for a given output: `run-manifest.json` inside a
/// directory output, or a `.manifest.json` sibling of a file output
/// (`demo.milp.json` → `demo.milp.manifest.json`).
pub fn manifest_path(output: &Path) -> PathBuf {
    if output.is_dir() {
        return output.join("run-manifest.json");
    }
    let name = output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    let stem = name.strip_suffix(".json").unwrap_or(&name);
    output.with_file_name(format!("{stem}.manifest.json"))
}

/// Sha256 of a file's deterministic content: JSON files are parsed,
/// wall-clock keys stripped, and re-serialized with sorted keys before
/// hashing; everything else is hashed as raw bytes.
pub fn hash_artifact(path: &Path) -> std::io::Result<String> {
    let bytes = fs::read(path)?;
    let is_json = path
        .extension()
        .is_some_and(|e| e == "json" || e == "jsonl");
    if is_json {
        if let Some(canon) = canonical_json(&bytes) {
            return Ok(sha256_hex(canon.as_bytes()));
        }
    }
    Ok(sha256_hex(&bytes))
}

/// Stripped, sorted-key rendering of (possibly line-delimited) JSON.
/// Returns `None` when the bytes don't parse, in which case the caller
/// falls back to raw hashing.
fn canonical_json(bytes: &[u8]) -> Option<String> {
    let text = std::str::from_utf8(bytes).ok()?;
    let mut out = String::new();
    for line in text.split('\n').filter(|l| !l.trim().is_empty()) {
        let mut value: Value = serde_json::from_str(line).ok().or_else(|| {
            // Not line-delimited: parse the whole document once.
            if out.is_empty() && text.trim_start().starts_with(['{', '[']) {
                serde_json::from_str(text).ok()
            } else {
                None
            }
        })?;
        let whole = serde_json::from_str::<Value>(line).is_err();
        strip_clock_keys(&mut value);
        out.push_str(&value.to_string());
        out.push('\n');
        if whole {
            break;
        }
    }
    Some(out)
}

fn strip_clock_keys(value: &mut Value) {
    match value {
        Value::Object(map) => {
            for key in CLOCK_KEYS {
                map.remove(*key);
            }
            for (_, v) in map.iter_mut() {
                strip_clock_keys(v);
            }
        }
        Value::Array(items) => {
            for v in items {
                strip_clock_keys(v);
            }
        }
        _ => {}
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            walk(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}
