use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const RECORD_FILE: &str = "run.toml";

/// Provenance for one command invocation. Written last, next to the artifacts it lists.
#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub run_id: String,
    pub command: String,
    /// Decimal strings: derived seeds use the full u64 range, beyond TOML integers.
    pub seeds: BTreeMap<String, String>,
    /// Path and SHA-256 of each input file.
    pub inputs: Vec<[String; 2]>,
    pub outputs: Vec<String>,
    pub started_unix: u64,
    pub elapsed_seconds: f64,
    /// File name -> exact text of each config the run used.
    pub config: BTreeMap<String, String>,
}

pub struct Recorder {
    command: String,
    seeds: BTreeMap<String, u64>,
    inputs: Vec<[String; 2]>,
    outputs: Vec<String>,
    config: BTreeMap<String, String>,
    started: SystemTime,
    clock: Instant,
}

impl Recorder {
    pub fn new(command: &str) -> Self {
        Recorder {
            command: command.to_string(),
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            config: BTreeMap::new(),
            started: SystemTime::now(),
            clock: Instant::now(),
        }
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.to_string(), value);
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push([path.display().to_string(), hex(&Sha256::digest(&bytes))]);
        Ok(())
    }

    pub fn config(&mut self, name: &str, text: String) {
        self.config.insert(name.to_string(), text);
    }

    /// Records an artifact by its path relative to the output directory.
    pub fn output(&mut self, out_dir: &Path, path: &Path) {
        let rel = path.strip_prefix(out_dir).unwrap_or(path);
        self.outputs.push(rel.display().to_string());
    }

    /// Same input contents, configs and seeds give the same id, wherever the files live.
    fn run_id(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.command.as_bytes());
        for (k, v) in &self.seeds {
            h.update(format!("\nseed {k}={v}").as_bytes());
        }
        for [_, digest] in &self.inputs {
            h.update(format!("\ninput {digest}").as_bytes());
        }
        for (k, v) in &self.config {
            h.update(format!("\nconfig {k}\n").as_bytes());
            h.update(v.as_bytes());
        }
        hex(&h.finalize()[..8])
    }

    pub fn finish(mut self, out_dir: &Path) -> Result<PathBuf> {
        self.outputs.sort();
        self.outputs.dedup();
        let record = RunRecord {
            run_id: self.run_id(),
            command: self.command,
            seeds: self.seeds.into_iter().map(|(k, v)| (k, v.to_string())).collect(),
            inputs: self.inputs,
            outputs: self.outputs,
            started_unix: self.started.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            elapsed_seconds: self.clock.elapsed().as_secs_f64(),
            config: self.config,
        };
        let path = out_dir.join(RECORD_FILE);
        let text = toml::to_string(&record).context("serializing run record")?;
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        log::info!("run {} recorded in {}", record.run_id, path.display());
        Ok(path)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(seed: u64) -> Recorder {
        let mut r = Recorder::new("crossval");
        r.seed("seed", seed);
        r.config("model.toml", "kind = \"single_stream\"".into());
        r
    }

    #[test]
    fn id_depends_on_inputs_only() {
        assert_eq!(rec(1).run_id(), rec(1).run_id());
        assert_ne!(rec(1).run_id(), rec(2).run_id());
        assert_eq!(rec(1).run_id().len(), 16);
    }

    #[test]
    fn writes_toml() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = rec(3);
        r.output(dir.path(), &dir.path().join("report.csv"));
        let path = r.finish(dir.path()).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let v: toml::Table = text.parse().unwrap();
        assert_eq!(v["command"].as_str(), Some("crossval"));
        assert_eq!(v["outputs"].as_array().unwrap()[0].as_str(), Some("report.csv"));
        assert_eq!(v["seeds"]["seed"].as_str(), Some("3"));
    }
}
