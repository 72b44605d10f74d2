//! Provenance record written next to the outputs of every pipeline command.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub package_version: String,
    /// Full configuration snapshot of the command.
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub format_versions: BTreeMap<String, u32>,
    /// Named phase durations in seconds.
    pub timings: BTreeMap<String, f64>,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    #[serde(skip)]
    started: Option<Instant>,
}

impl RunManifest {
    pub fn start(command: impl Into<String>, args: Vec<String>) -> Self {
        RunManifest {
            command: command.into(),
            args,
            package_version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::Value::Null,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            format_versions: BTreeMap::new(),
            timings: BTreeMap::new(),
            started_unix_seconds: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            wall_clock_seconds: 0.0,
            started: Some(Instant::now()),
        }
    }

    pub fn config<C: Serialize>(&mut self, config: &C) -> Result<&mut Self> {
        self.config = serde_json::to_value(config)?;
        Ok(self)
    }

    pub fn seed(&mut self, name: &str, seed: u64) -> &mut Self {
        self.seeds.insert(name.to_string(), seed);
        self
    }

    pub fn input(&mut self, path: impl Into<PathBuf>) -> &mut Self {
        self.inputs.push(path.into());
        self
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) -> &mut Self {
        self.outputs.push(path.into());
        self
    }

    pub fn format_version(&mut self, artifact: &str, version: u32) -> &mut Self {
        self.format_versions.insert(artifact.to_string(), version);
        self
    }

    pub fn timing(&mut self, phase: &str, seconds: f64) -> &mut Self {
        self.timings.insert(phase.to_string(), seconds);
        self
    }

    /// Stamps the elapsed wall-clock time and writes the manifest into `dir`.
    pub fn finish(&mut self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        if let Some(t0) = self.started {
            self.wall_clock_seconds = t0.elapsed().as_secs_f64();
        }
        let path = dir.as_ref().join(RUN_MANIFEST_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_and_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::start("qoi", vec!["--k".into(), "5".into()]);
        m.seed("base", 7).timing("qoi", 1.5).output("ranks.csv");
        m.config(&serde_json::json!({"k": 5})).unwrap();
        let path = m.finish(dir.path()).unwrap();
        let back: RunManifest =
            serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(back.command, "qoi");
        assert_eq!(back.seeds["base"], 7);
        assert_eq!(back.timings["qoi"], 1.5);
        assert!(back.wall_clock_seconds >= 0.0);
    }
}
