//! Output bookkeeping and the run manifest.
//!
//! Each command records the files it read and wrote. On success one JSON
//! line per command is stored in `<output>/manifest.jsonl`, replacing any
//! earlier line of the same command. Lines carry no timestamps, so an
//! identical rerun reproduces the manifest byte for byte.

use std::fs::{self, File};
use std::io::{BufWriter, Read};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::CliError;

pub const MANIFEST: &str = "manifest.jsonl";

/// Pipeline order of the manifest lines.
const ORDER: [&str; 6] = ["synth", "ingest", "complexity", "relatedness", "spatial", "regress"];

pub struct Run<'a> {
    pub cfg: &'a Config,
    command: &'static str,
    base: PathBuf,
    inputs: Vec<PathBuf>,
    outputs: Vec<String>,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let mut f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

impl<'a> Run<'a> {
    pub fn new(cfg: &'a Config, command: &'static str) -> Self {
        let base = cfg
            .source
            .as_deref()
            .and_then(Path::parent)
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Self {
            cfg,
            command,
            base,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Registers an input file and returns it.
    pub fn input<'p>(&mut self, path: &'p Path) -> &'p Path {
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
        path
    }

    /// Path of an upstream output, failing with a hint when it is absent.
    pub fn upstream(&mut self, rel: &str, producer: &str) -> Result<PathBuf, CliError> {
        let p = self.cfg.output.join(rel);
        if !p.is_file() {
            return Err(CliError::Config(vec![format!(
                "{} not found; run `{producer}` first",
                p.display()
            )]));
        }
        self.input(&p);
        Ok(p)
    }

    pub fn output_path(&self, rel: &str) -> PathBuf {
        self.cfg.output.join(rel)
    }

    /// Creates `<output>/<rel>` and registers it.
    pub fn create(&mut self, rel: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.output_path(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        let f = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        if !self.outputs.iter().any(|o| o == rel) {
            self.outputs.push(rel.to_string());
        }
        Ok(BufWriter::new(f))
    }

    fn display_input(&self, p: &Path) -> String {
        let rel = p.strip_prefix(&self.base).unwrap_or(p);
        rel.to_string_lossy().replace('\\', "/")
    }

    /// Writes the manifest line for this command.
    pub fn finish(self) -> Result<(), CliError> {
        let mut inputs = Vec::new();
        for p in &self.inputs {
            inputs.push(json!({ "path": self.display_input(p), "sha256": sha256_file(p)? }));
        }
        let mut outputs = Vec::new();
        let mut sorted = self.outputs.clone();
        sorted.sort();
        for rel in &sorted {
            outputs.push(json!({ "path": rel, "sha256": sha256_file(&self.output_path(rel))? }));
        }
        let line = json!({
            "command": self.command,
            "artifact": format!("regcx {}", env!("CARGO_PKG_VERSION")),
            "config_sha256": hex::encode(Sha256::digest(&self.cfg.digest_input)),
            "rng": regcx::synth::RNG_ALGORITHM,
            "inputs": inputs,
            "outputs": outputs,
        });
        let path = self.cfg.output.join(MANIFEST);
        fs::create_dir_all(&self.cfg.output).map_err(|e| CliError::io(&self.cfg.output, e))?;
        let mut lines: Vec<Value> = match fs::read_to_string(&path) {
            Ok(text) => text.lines().filter_map(|l| serde_json::from_str(l).ok()).collect(),
            Err(_) => Vec::new(),
        };
        lines.retain(|v| v["command"] != self.command);
        lines.push(line);
        let rank = |v: &Value| ORDER.iter().position(|c| v["command"] == *c).unwrap_or(ORDER.len());
        lines.sort_by_key(rank);
        let mut text = String::new();
        for l in &lines {
            text.push_str(&l.to_string());
            text.push('\n');
        }
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        log::info!("{}: wrote {} files", self.command, sorted.len());
        Ok(())
    }
}
