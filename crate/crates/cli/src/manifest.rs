use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Record of one command run. Output digests cover the artifact bytes only,
/// so two runs on the same inputs give the same digests.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
    pub grid_steps: Option<usize>,
    pub version: &'static str,
    pub wall_clock_secs: f64,
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output directory plus the manifest being built for it.
pub struct Run {
    dir: PathBuf,
    started: Instant,
    manifest: RunManifest,
}

impl Run {
    pub fn new(command: &str, dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            started: Instant::now(),
            manifest: RunManifest {
                command: command.to_string(),
                args: std::env::args().skip(1).collect(),
                inputs: Vec::new(),
                seed: None,
                grid_steps: None,
                version: env!("CARGO_PKG_VERSION"),
                wall_clock_secs: 0.0,
                outputs: BTreeMap::new(),
            },
        })
    }

    /// Reads an input file and records its digest.
    pub fn read_input(&mut self, path: &Path) -> Result<String, Failure> {
        let bytes = fs::read(path)
            .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
        self.manifest.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        String::from_utf8(bytes)
            .map_err(|_| Failure::input(format!("{} is not UTF-8", path.display())))
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.manifest.seed = Some(seed);
    }

    pub fn set_grid(&mut self, steps: usize) {
        self.manifest.grid_steps = Some(steps);
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)
            .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))?;
        self.manifest.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| Failure::internal(format!("serializing {name}: {e}")))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `manifest.json`. Called on success and before failing exits
    /// that still produced artifacts.
    pub fn finish(mut self) -> Result<(), Failure> {
        self.manifest.wall_clock_secs = self.started.elapsed().as_secs_f64();
        let text = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| Failure::internal(e.to_string()))?;
        let path = self.dir.join("manifest.json");
        fs::write(&path, text + "\n")
            .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
    }
}
