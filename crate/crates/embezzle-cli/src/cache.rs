//! Config-addressed result cache: the key is the SHA-256 of the
//! canonicalized effective-config JSON plus the artifact version, so a
//! reordered-but-equal config hits and any semantic or format change
//! misses.

use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::EffectiveConfig;
use crate::record::{ResultRecord, ARTIFACT_VERSION};
use crate::CliError;

/// Canonical form: serialize through `serde_json::Value`, whose object
/// maps are ordered by key. `output_path` is excluded — it says where
/// results go, not what they are, so runs into different directories can
/// share a cache through `EMBZ_CACHE_DIR`.
pub fn canonical_config_json(cfg: &EffectiveConfig) -> String {
    let mut value = serde_json::to_value(cfg).expect("config serializes");
    if let Some(map) = value.as_object_mut() {
        map.remove("output_path");
    }
    serde_json::to_string(&value).expect("value serializes")
}

pub fn config_hash(cfg: &EffectiveConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(canonical_config_json(cfg).as_bytes());
    hasher.update(b"\n");
    hasher.update(ARTIFACT_VERSION.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Cache root: `EMBZ_CACHE_DIR` if set, else `.cache` inside the output
/// directory.
pub fn cache_dir(out_dir: &Path) -> PathBuf {
    match std::env::var_os("EMBZ_CACHE_DIR") {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => out_dir.join(".cache"),
    }
}

fn entry_path(cache_root: &Path, hash: &str) -> PathBuf {
    cache_root.join(hash).join("record.json")
}

/// Look up a stored record. Any unreadable or stale entry is treated as a
/// miss — the cache is an optimization, never an authority.
pub fn load(cache_root: &Path, hash: &str) -> Option<ResultRecord> {
    let bytes = fs::read(entry_path(cache_root, hash)).ok()?;
    let rec: ResultRecord = serde_json::from_slice(&bytes).ok()?;
    (rec.artifact_version == ARTIFACT_VERSION && rec.config_hash == hash).then_some(rec)
}

pub fn store(cache_root: &Path, rec: &ResultRecord) -> Result<(), CliError> {
    let path = entry_path(cache_root, &rec.config_hash);
    let dir = path.parent().expect("entry path has a parent");
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("creating cache dir: {e}")))?;
    let tmp = dir.join("record.json.tmp");
    let body = serde_json::to_vec_pretty(rec).expect("record serializes");
    fs::write(&tmp, body).map_err(|e| CliError::Io(format!("writing cache entry: {e}")))?;
    fs::rename(&tmp, &path).map_err(|e| CliError::Io(format!("committing cache entry: {e}")))?;
    Ok(())
}
