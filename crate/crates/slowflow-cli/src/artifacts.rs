//! Artifact output: deterministic JSON and CSV writers plus the manifest.
//!
//! Every file is serialized to bytes first and hashed as written, so the
//! manifest always lists exactly what landed on disk. The output directory
//! is created lazily at the first write; a run that fails validation leaves
//! nothing behind.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Failure;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}

#[derive(Debug, Clone, Serialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    experiment: String,
    config_hash: &'a str,
    seed: u64,
    /// Wall-clock seconds per phase; excluded from reproducibility checks.
    timings: BTreeMap<String, f64>,
    artifacts: &'a [ArtifactEntry],
}

pub struct ArtifactSet {
    dir: PathBuf,
    entries: Vec<ArtifactEntry>,
    timings: BTreeMap<String, f64>,
    started: Instant,
    created: bool,
}

impl ArtifactSet {
    pub fn new(dir: &Path) -> Self {
        ArtifactSet {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
            timings: BTreeMap::new(),
            started: Instant::now(),
            created: false,
        }
    }

    /// Record the elapsed time since the previous mark under `label`.
    pub fn mark(&mut self, label: &str) {
        let elapsed = self.started.elapsed().as_secs_f64();
        let spent: f64 = self.timings.values().sum();
        self.timings.insert(label.to_string(), elapsed - spent);
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        if !self.created {
            fs::create_dir_all(&self.dir)?;
            self.created = true;
        }
        fs::write(self.dir.join(name), bytes)?;
        self.entries.push(ArtifactEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| Failure::Numerical(format!("serializing {name}: {e}")))?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    /// Rows of shortest round-trip decimals under the given header.
    pub fn write_csv<I>(&mut self, name: &str, header: &[String], rows: I) -> Result<(), Failure>
    where
        I: IntoIterator<Item = Vec<f64>>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            w.write_record(row.iter().map(|v| v.to_string()))
                .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| csv_err(e.error()))?;
        self.write_bytes(name, &bytes)
    }

    /// Write manifest.json and report what the run produced.
    pub fn finish(
        mut self,
        experiment: impl std::fmt::Display,
        config_hash: &str,
        seed: u64,
    ) -> Result<Vec<String>, Failure> {
        self.mark("finish");
        let manifest = Manifest {
            tool: "slowflow",
            version: env!("CARGO_PKG_VERSION"),
            experiment: experiment.to_string(),
            config_hash,
            seed,
            timings: self.timings.clone(),
            artifacts: &self.entries,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| Failure::Numerical(format!("serializing manifest: {e}")))?;
        bytes.push(b'\n');
        if !self.created {
            fs::create_dir_all(&self.dir)?;
        }
        fs::write(self.dir.join("manifest.json"), &bytes)?;
        let mut names: Vec<String> = self.entries.iter().map(|e| e.path.clone()).collect();
        names.push("manifest.json".to_string());
        Ok(names)
    }
}

fn csv_err(e: impl std::fmt::Display) -> Failure {
    Failure::Numerical(format!("csv: {e}"))
}
