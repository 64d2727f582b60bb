//! Run manifest: config echo, seeds, wall time, artifact checksums, verdict.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub schema: u32,
    pub experiment: String,
    pub config: String,
    pub seeds: Vec<u64>,
    pub wall_seconds: f64,
    pub pass: bool,
    pub failures: Vec<String>,
    pub artifacts: Vec<ArtifactEntry>,
}

pub struct ArtifactWriter {
    dir: PathBuf,
    written: Vec<ArtifactEntry>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> std::io::Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)?;
        let mut hasher = Sha256::new();
        hasher.update(contents.as_bytes());
        self.written.push(ArtifactEntry {
            path: name.to_string(),
            bytes: contents.len() as u64,
            sha256: format!("{:x}", hasher.finalize()),
        });
        Ok(path)
    }

    pub fn finish(
        mut self,
        experiment: &str,
        config_echo: String,
        seeds: Vec<u64>,
        wall_seconds: f64,
        failures: Vec<String>,
    ) -> std::io::Result<Manifest> {
        let manifest = Manifest {
            schema: 1,
            experiment: experiment.to_string(),
            config: config_echo,
            seeds,
            wall_seconds,
            pass: failures.is_empty(),
            failures,
            artifacts: std::mem::take(&mut self.written),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serialization");
        std::fs::write(self.dir.join("manifest.json"), text)?;
        Ok(manifest)
    }
}
