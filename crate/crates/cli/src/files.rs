//! Board file loading and saving, hashing and run manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use pdnpulse_core::report::{signature_from_csv, signature_to_csv};
use pdnpulse_core::touchstone::{n_ports_from_path, DataFormat, FreqUnit, ParamKind};
use pdnpulse_core::{parse_touchstone, write_touchstone, BoardSignature, TouchstoneDocument, TouchstoneOptions};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

fn is_touchstone(path: &Path) -> bool {
    n_ports_from_path(path).is_ok()
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("board").to_string()
}

/// Reads a signature from `.csv` or `.sNp`.
pub fn load_signature(path: &Path) -> Result<BoardSignature> {
    let text = read_text(path)?;
    let label = stem(path);
    if is_touchstone(path) {
        let n = n_ports_from_path(path)?;
        let doc = parse_touchstone(&text, n).with_context(|| format!("{}", path.display()))?;
        Ok(doc.to_signature(&label)?)
    } else {
        signature_from_csv(&text, &label).with_context(|| format!("{}", path.display()))
    }
}

/// Writes a signature as `.csv`, or as Touchstone (Hz, RI, 50 Ω) when the
/// extension is `.sNp` with N matching the port count.
pub fn save_signature(path: &Path, sig: &BoardSignature, kind: ParamKind, comments: Vec<String>) -> Result<()> {
    if is_touchstone(path) {
        let n = n_ports_from_path(path)?;
        if n != sig.n_ports() {
            bail!("{} names {n} ports but the board has {}", path.display(), sig.n_ports());
        }
        let options = TouchstoneOptions {
            unit: FreqUnit::Hz,
            kind,
            format: DataFormat::Ri,
            reference: 50.0,
        };
        let doc = TouchstoneDocument::from_signature(sig, options, comments)?;
        write_text(path, &write_touchstone(&doc))
    } else {
        write_text(path, &signature_to_csv(sig))
    }
}

#[derive(Debug, Serialize)]
struct FileHash {
    path: String,
    sha256: String,
}

/// Inputs, seed, config hash and outputs of one run.
#[derive(Debug, Serialize)]
pub struct Manifest {
    format_version: u32,
    tool: String,
    subcommand: String,
    args: Vec<String>,
    inputs: Vec<FileHash>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    config_sha256: Option<String>,
    outputs: Vec<FileHash>,
    runtime_seconds: f64,
    #[serde(skip)]
    started: Option<Instant>,
}

impl Manifest {
    pub fn new(subcommand: &str) -> Self {
        Self {
            format_version: MANIFEST_FORMAT_VERSION,
            tool: format!("pdnpulse {}", env!("CARGO_PKG_VERSION")),
            subcommand: subcommand.to_string(),
            args: std::env::args().skip(1).collect(),
            inputs: Vec::new(),
            seed: None,
            config_sha256: None,
            outputs: Vec::new(),
            runtime_seconds: 0.0,
            started: Some(Instant::now()),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let sha256 = file_sha256(path)?;
        self.inputs.push(FileHash {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn config(&mut self, text: &str) {
        self.config_sha256 = Some(sha256_hex(text.as_bytes()));
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        let sha256 = file_sha256(path)?;
        self.outputs.push(FileHash {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    /// Writes the manifest to `path`.
    pub fn finish(mut self, path: &Path) -> Result<()> {
        self.runtime_seconds = self.started.map(|s| s.elapsed().as_secs_f64()).unwrap_or(0.0);
        write_text(path, &(serde_json::to_string_pretty(&self)? + "\n"))
    }
}

/// `board.csv` → `board.csv.manifest.json`.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}
