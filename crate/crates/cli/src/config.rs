//! JSON run configs: file, then flag overrides, then typed validation.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Presets accepted by `--preset`: the condition table plus the
/// monochromatic reference wave.
pub const MONO_PRESET: &str = "mono";

pub trait Params: Serialize + DeserializeOwned {
    /// Checks invariants and that referenced inputs exist; `out` is the
    /// resolved output directory that default input paths live in.
    fn validate(&self, out: &Path) -> Result<(), CliError>;
}

/// Command-line overrides. `seed`, `preset`, `out` and `threads` are shared
/// by every command; the remaining keys belong to the command's parameters.
#[derive(Debug, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub preset: Option<String>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    /// Dotted key paths with JSON values.
    pub values: Vec<(String, Value)>,
}

#[derive(Debug)]
pub struct Resolved<P> {
    pub params: P,
    pub seed: u64,
    pub preset: Option<String>,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub hash: String,
}

/// `key=value` with `value` parsed as JSON, falling back to a bare string.
pub fn parse_assignment(s: &str) -> Result<(String, Value), CliError> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| CliError::usage(format!("expected KEY=VALUE, got {s:?}")))?;
    if key.is_empty() {
        return Err(CliError::usage(format!("empty key in {s:?}")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

fn set_path(obj: &mut Map<String, Value>, dotted: &str, value: Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = dotted.split('.').collect();
    let last = parts.pop().expect("split yields one part");
    let mut cur = obj;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Object(Map::new()));
        cur = entry
            .as_object_mut()
            .ok_or_else(|| CliError::config(dotted, format!("{p} is not an object")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn load_object(path: Option<&Path>) -> Result<Map<String, Value>, CliError> {
    let Some(path) = path else { return Ok(Map::new()) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("config", format!("cannot read {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(CliError::config("config", "config file must hold a JSON object")),
        Err(e) => Err(CliError::config("config", format!("malformed JSON: {e}"))),
    }
}

fn take<T: DeserializeOwned>(obj: &mut Map<String, Value>, key: &str, expected: &str) -> Result<Option<T>, CliError> {
    match obj.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v).map(Some).map_err(|_| CliError::config(key, format!("expected {expected}"))),
    }
}

fn deserialize_params<P: DeserializeOwned>(obj: Map<String, Value>) -> Result<P, CliError> {
    serde_path_to_error::deserialize(Value::Object(obj)).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().to_string();
        let mut key = if path == "." { String::new() } else { path };
        if let Some(rest) = message.strip_prefix("unknown field `") {
            let field = rest.split('`').next().unwrap_or_default();
            if key.is_empty() {
                key = field.to_string();
            } else if key.rsplit('.').next() != Some(field) {
                key = format!("{key}.{field}");
            }
        }
        CliError::config(key, message)
    })
}

pub fn resolve<P: Params>(command: &str, o: Overrides) -> Result<Resolved<P>, CliError> {
    let mut obj = load_object(o.config.as_deref())?;
    for (k, v) in o.values {
        set_path(&mut obj, &k, v)?;
    }
    if let Some(s) = o.seed {
        obj.insert("seed".into(), json!(s));
    }
    if let Some(p) = o.preset {
        obj.insert("preset".into(), json!(p));
    }
    if let Some(p) = o.out {
        obj.insert("out".into(), json!(p));
    }
    if let Some(t) = o.threads {
        obj.insert("threads".into(), json!(t));
    }
    let seed = take::<u64>(&mut obj, "seed", "a non-negative integer")?.unwrap_or(0);
    let preset = take::<String>(&mut obj, "preset", "a preset name")?;
    if let Some(p) = &preset {
        if p != MONO_PRESET && wavefield::synth::preset(p).is_err() {
            let known: Vec<&str> = wavefield::synth::preset_ids().chain([MONO_PRESET]).collect();
            return Err(CliError::config("preset", format!("unknown preset {p:?}, expected one of {}", known.join(", "))));
        }
    }
    let out = take::<PathBuf>(&mut obj, "out", "a path")?.unwrap_or_else(|| PathBuf::from("out"));
    let threads = take::<usize>(&mut obj, "threads", "a positive integer")?;
    if threads == Some(0) {
        return Err(CliError::config("threads", "threads must be at least 1"));
    }
    let params: P = deserialize_params(obj)?;
    params.validate(&out)?;
    let canonical = serde_json::to_vec(&json!({
        "command": command,
        "seed": seed,
        "preset": preset,
        "params": params,
    }))
    .expect("config serializes");
    let hash = hex::encode(Sha256::digest(&canonical));
    Ok(Resolved { params, seed, preset, out, threads, hash })
}

/// `path` if set, else `name` inside the output directory.
pub fn input_path(path: &Option<PathBuf>, out: &Path, name: &str) -> PathBuf {
    path.clone().unwrap_or_else(|| out.join(name))
}

/// Fails validation when an input file is missing.
pub fn require_file(key: &str, path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::config(key, format!("input file {} does not exist", path.display())))
    }
}

/// Validation error unless `ok`.
pub fn ensure(ok: bool, key: &str, message: impl Into<String>) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::config(key, message))
    }
}
