//! Run manifests: every CSV or trace artifact written to disk gets a
//! `<name>.manifest.json` sibling recording the command, resolved
//! configuration, seed, tool version, input-file digests, and timestamps.

use qsc_core::Result;
use sha2::{Digest, Sha256};
use std::path::Path;
use std::sync::OnceLock;

static STARTED: OnceLock<String> = OnceLock::new();

/// Captures the process start time on first use.
pub fn mark_start() {
    STARTED.get_or_init(|| chrono::Utc::now().to_rfc3339());
}

fn digest_if_file(spec: &str) -> Option<(String, String)> {
    let path = Path::new(spec);
    if !path.is_file() {
        return None;
    }
    let bytes = std::fs::read(path).ok()?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Some((spec.to_string(), hex::encode(hasher.finalize())))
}

/// Writes `<artifact>.manifest.json` next to the artifact.
pub fn write(
    artifact: &Path,
    command: &str,
    seed: u64,
    config: serde_json::Value,
    input_specs: &[&str],
) -> Result<()> {
    mark_start();
    let digests: serde_json::Map<String, serde_json::Value> = input_specs
        .iter()
        .filter_map(|s| digest_if_file(s))
        .map(|(k, v)| (k, serde_json::Value::String(v)))
        .collect();
    let doc = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "config": config,
        "input_digests": digests,
        "started_utc": STARTED.get().cloned().unwrap_or_default(),
        "finished_utc": chrono::Utc::now().to_rfc3339(),
        "artifact": artifact.display().to_string(),
    });
    let manifest_path = {
        let mut name = artifact.as_os_str().to_os_string();
        name.push(".manifest.json");
        std::path::PathBuf::from(name)
    };
    std::fs::write(manifest_path, serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}
