//! Output directory bookkeeping: every artifact carries the command, seed and
//! config hash, and each run ends with a `<command>.json` summary.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use wavefield::field::{write_frames, ScalarField};

use crate::error::CliError;

pub struct Run {
    pub command: &'static str,
    pub seed: u64,
    pub preset: Option<String>,
    pub hash: String,
    pub out: PathBuf,
    written: Vec<String>,
}

impl Run {
    pub fn create(command: &'static str, seed: u64, preset: Option<String>, hash: String, out: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(out)?;
        Ok(Self { command, seed, preset, hash, out: out.to_path_buf(), written: Vec::new() })
    }

    pub fn meta(&self) -> Value {
        json!({
            "command": self.command,
            "seed": self.seed,
            "preset": self.preset,
            "config_hash": self.hash,
        })
    }

    fn meta_with(&self, extra: Option<Value>) -> Value {
        let mut m = self.meta();
        if let (Some(Value::Object(extra)), Value::Object(base)) = (extra, &mut m) {
            base.extend(extra);
        }
        m
    }

    fn record(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.out.join(name)
    }

    pub fn write_frames(
        &mut self,
        name: &str,
        kind: &str,
        frames: &[&ScalarField],
        dt: f64,
        t0: f64,
        extra: Option<Value>,
    ) -> Result<(), CliError> {
        let meta = self.meta_with(extra);
        let path = self.record(name);
        write_frames(&path, kind, frames, dt, t0, Some(meta))?;
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.record(name);
        std::fs::write(path, text)?;
        Ok(())
    }

    /// JSON document with the run metadata under `"meta"`.
    pub fn write_json(&mut self, name: &str, body: &impl Serialize) -> Result<(), CliError> {
        let doc = json!({ "meta": self.meta(), "data": body });
        let text = serde_json::to_string_pretty(&doc).expect("output serializes");
        self.write_text(name, &(text + "\n"))
    }

    /// Lists a file written by library code, such as a point-cloud sidecar.
    pub fn note_written(&mut self, name: &str) {
        self.written.push(name.to_string());
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn finish(mut self, config: &impl Serialize, results: Value) -> Result<(), CliError> {
        let name = format!("{}.json", self.command);
        let doc = json!({
            "meta": self.meta(),
            "config": config,
            "outputs": self.written,
            "results": results,
        });
        let text = serde_json::to_string_pretty(&doc).expect("summary serializes");
        let path = self.record(&name);
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}
