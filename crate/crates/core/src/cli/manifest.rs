use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::trainer::TrainConfig;

use super::CliError;

/// Package version plus the git revision the binary was built from.
pub const BUILD_ID: &str = env!("EXTREMITY_BUILD_ID");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSeed {
    pub label: String,
    pub trial: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the manifest's directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub build_id: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub configs: Vec<TrainConfig>,
    pub trial_seeds: Vec<TrialSeed>,
    pub files: Vec<FileEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn sha256_file(path: &Path) -> Result<(String, u64), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

impl RunManifest {
    pub fn start(command: &str) -> Self {
        let t = now();
        RunManifest {
            command: command.to_string(),
            build_id: BUILD_ID.to_string(),
            started_unix: t,
            finished_unix: t,
            configs: Vec::new(),
            trial_seeds: Vec::new(),
            files: Vec::new(),
        }
    }

    /// Checksums `path`, which must lie under `root`.
    pub fn add_file(&mut self, root: &Path, path: &Path) -> Result<(), CliError> {
        let (sha256, bytes) = sha256_file(path)?;
        let rel = path.strip_prefix(root).unwrap_or(path);
        let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        self.files.retain(|f| f.path != rel);
        self.files.push(FileEntry { path: rel, bytes, sha256 });
        Ok(())
    }

    pub fn checksum(&self, rel: &str) -> Option<&str> {
        self.files.iter().find(|f| f.path == rel).map(|f| f.sha256.as_str())
    }

    /// Stamps the finish time and writes `manifest.json` into `root`.
    pub fn finish(mut self, root: &Path) -> Result<Self, CliError> {
        self.finished_unix = now();
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        write_json(&root.join(MANIFEST_FILE), &self)?;
        Ok(self)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Json(path.display().to_string(), e))
    }

    /// Files whose current checksum differs from the recorded one.
    pub fn verify(&self, root: &Path) -> Result<Vec<PathBuf>, CliError> {
        let mut bad = Vec::new();
        for f in &self.files {
            let p = root.join(&f.path);
            if !p.exists() || sha256_file(&p)?.0 != f.sha256 {
                bad.push(p);
            }
        }
        Ok(bad)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Json(path.display().to_string(), e))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksums_match_known_digest_and_detect_changes() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("sub").join("a.txt");
        std::fs::create_dir_all(f.parent().unwrap()).unwrap();
        std::fs::write(&f, "abc").unwrap();
        let mut m = RunManifest::start("test");
        m.add_file(dir.path(), &f).unwrap();
        // FIPS 180-2 test vector for "abc".
        assert_eq!(m.checksum("sub/a.txt"), Some("ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"));
        let m = m.finish(dir.path()).unwrap();
        assert_eq!(RunManifest::load(&dir.path().join(MANIFEST_FILE)).unwrap(), m);
        assert!(m.verify(dir.path()).unwrap().is_empty());
        std::fs::write(&f, "abd").unwrap();
        assert_eq!(m.verify(dir.path()).unwrap(), vec![f]);
    }
}
