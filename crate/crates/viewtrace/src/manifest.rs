use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Provenance record written next to every artifact-producing run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// SHA-256 of the effective configuration, serialized as JSON.
    pub config_digest: String,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub rng_seed: Option<u64>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new<C: Serialize>(subcommand: &str, config: &C) -> anyhow::Result<Self> {
        Ok(Self {
            subcommand: subcommand.into(),
            config_digest: digest(config)?,
            inputs: Vec::new(),
            outputs: Vec::new(),
            rng_seed: None,
            tool_version: env!("CARGO_PKG_VERSION").into(),
        })
    }

    pub fn input(mut self, p: &Path) -> Self {
        self.inputs.push(p.to_path_buf());
        self
    }

    pub fn output(mut self, p: &Path) -> Self {
        self.outputs.push(p.to_path_buf());
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.rng_seed = Some(seed);
        self
    }

    /// `<primary output>.manifest.json`.
    pub fn path_for(output: &Path) -> PathBuf {
        let mut name = output.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        output.with_file_name(name)
    }

    pub fn write_beside(&self, output: &Path) -> anyhow::Result<PathBuf> {
        let path = Self::path_for(output);
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }
}

pub fn digest<C: Serialize>(config: &C) -> anyhow::Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = digest(&("x", 1)).unwrap();
        assert_eq!(a, digest(&("x", 1)).unwrap());
        assert_ne!(a, digest(&("x", 2)).unwrap());
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn manifest_lands_beside_output() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("corpus.jsonl");
        let m = RunManifest::new("simulate", &7u64).unwrap().output(&out).seed(7);
        let p = m.write_beside(&out).unwrap();
        assert_eq!(p.file_name().unwrap(), "corpus.jsonl.manifest.json");
        let back: RunManifest = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
