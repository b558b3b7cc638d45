//! The run manifest: per-stage input/output hashes, config snapshot, and
//! duration, for resumability and reproducibility checks.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use discardbench::rng::fnv1a;

/// One executed stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub stage: String,
    /// Hash per input file (path relative to the work dir where possible).
    pub input_hashes: BTreeMap<String, String>,
    pub output_hashes: BTreeMap<String, String>,
    pub config_hash: String,
    pub duration_ms: f64,
}

/// Manifest of a pipeline run; the latest entry per stage wins.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub entries: Vec<ManifestEntry>,
}

/// 64-bit FNV-1a fingerprint of a file's bytes.
pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(format!("{:016x}", fnv1a(&bytes)))
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    format!("{:016x}", fnv1a(bytes))
}

impl RunManifest {
    pub fn load_or_default(path: &Path) -> RunManifest {
        std::fs::read_to_string(path)
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .unwrap_or_default()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn record(
        &mut self,
        stage: &str,
        inputs: &[PathBuf],
        outputs: &[PathBuf],
        config_hash: String,
        duration_ms: f64,
    ) -> Result<()> {
        let mut input_hashes = BTreeMap::new();
        for p in inputs {
            input_hashes.insert(p.display().to_string(), hash_file(p)?);
        }
        let mut output_hashes = BTreeMap::new();
        for p in outputs {
            output_hashes.insert(p.display().to_string(), hash_file(p)?);
        }
        self.entries.push(ManifestEntry {
            stage: stage.to_string(),
            input_hashes,
            output_hashes,
            config_hash,
            duration_ms,
        });
        Ok(())
    }

    /// The most recent entry for a stage.
    pub fn latest(&self, stage: &str) -> Option<&ManifestEntry> {
        self.entries.iter().rev().find(|e| e.stage == stage)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashes_are_stable_and_sensitive() {
        let dir = std::env::temp_dir().join("discardbench_manifest_test");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("f.txt");
        std::fs::write(&p, "hello").unwrap();
        let a = hash_file(&p).unwrap();
        let b = hash_file(&p).unwrap();
        assert_eq!(a, b);
        std::fs::write(&p, "hellp").unwrap();
        assert_ne!(hash_file(&p).unwrap(), a);
    }

    #[test]
    fn manifest_round_trip_and_latest() {
        let dir = std::env::temp_dir().join("discardbench_manifest_test2");
        std::fs::create_dir_all(&dir).unwrap();
        let f = dir.join("x.csv");
        std::fs::write(&f, "a,b\n1,2\n").unwrap();
        let mut m = RunManifest::default();
        m.record(
            "engineer",
            &[],
            std::slice::from_ref(&f),
            hash_bytes(b"cfg"),
            12.0,
        )
        .unwrap();
        m.record(
            "engineer",
            std::slice::from_ref(&f),
            &[],
            hash_bytes(b"cfg"),
            5.0,
        )
        .unwrap();
        let p = dir.join("manifest.json");
        m.save(&p).unwrap();
        let back = RunManifest::load_or_default(&p);
        assert_eq!(back.entries.len(), 2);
        assert_eq!(back.latest("engineer").unwrap().duration_ms, 5.0);
    }
}
