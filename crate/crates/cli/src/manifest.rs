//! Run directories and their manifests.
//!
//! A run directory is named after the command and a hash of everything that
//! determines its outputs: the resolved parameters and the content of every
//! input. The manifest records that hash, the seed, input and output digests
//! and the only timestamp a run produces.

use std::fs::{self, File};
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut hasher = Sha256::new();
    io::copy(&mut file, &mut hasher).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(hex::encode(hasher.finalize()))
}

/// Digest of a file or of every file below a directory (relative paths and
/// contents, in sorted order).
pub fn sha256_path(path: &Path) -> Result<String> {
    if path.is_file() {
        return sha256_file(path);
    }
    let mut files = Vec::new();
    collect_files(path, path, &mut files)?;
    files.sort();
    let mut hasher = Sha256::new();
    for rel in files {
        if rel == Path::new(MANIFEST) {
            continue;
        }
        hasher.update(rel.to_string_lossy().as_bytes());
        hasher.update([0]);
        let mut buf = Vec::new();
        File::open(path.join(&rel))
            .and_then(|mut f| f.read_to_end(&mut buf))
            .with_context(|| format!("cannot read {}", path.join(&rel).display()))?;
        hasher.update(Sha256::digest(&buf));
    }
    Ok(hex::encode(hasher.finalize()))
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).with_context(|| format!("cannot list {}", dir.display()))? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            out.push(path.strip_prefix(root).expect("below root").to_owned());
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

/// A command invocation being recorded.
pub struct Run {
    pub command: &'static str,
    pub seed: Option<u64>,
    pub params: Value,
    pub inputs: Vec<FileDigest>,
    pub config_hash: String,
    pub dir: PathBuf,
    outputs: Vec<PathBuf>,
}

impl Run {
    /// Hashes the inputs, derives the config hash and creates the output
    /// directory (`out`, or `<runs>/<command>-<hash12>`).
    pub fn start(
        command: &'static str,
        seed: Option<u64>,
        params: Value,
        inputs: &[(&str, &Path)],
        out: Option<&Path>,
        runs: &Path,
    ) -> Result<Run> {
        let inputs = inputs
            .iter()
            .map(|(role, path)| {
                Ok(FileDigest {
                    role: (*role).to_owned(),
                    path: path.to_path_buf(),
                    sha256: sha256_path(path)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let keyed = serde_json::json!({
            "command": command,
            "seed": seed,
            "params": params,
            "inputs": inputs.iter().map(|d| (&d.role, &d.sha256)).collect::<Vec<_>>(),
        });
        let config_hash = hex::encode(Sha256::digest(serde_json::to_vec(&keyed)?));
        let dir = match out {
            Some(p) => p.to_path_buf(),
            None => runs.join(format!("{command}-{}", &config_hash[..12])),
        };
        fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Run {
            command,
            seed,
            params,
            inputs,
            config_hash,
            dir,
            outputs: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Declares an output file (relative to the run directory).
    pub fn output(&mut self, name: impl Into<PathBuf>) -> PathBuf {
        let rel = name.into();
        let full = self.dir.join(&rel);
        self.outputs.push(rel);
        full
    }

    /// Checks that every declared output exists and writes the manifest.
    pub fn finish(self) -> Result<PathBuf> {
        let mut outputs = Vec::new();
        for rel in &self.outputs {
            let full = self.dir.join(rel);
            if !full.exists() {
                bail!("declared output {} was not written", full.display());
            }
            outputs.push(FileDigest {
                role: "output".into(),
                path: rel.clone(),
                sha256: sha256_path(&full)?,
            });
        }
        let manifest = serde_json::json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config_hash": self.config_hash,
            "seed": self.seed,
            "params": self.params,
            "inputs": self.inputs,
            "outputs": outputs,
            "created": chrono::Utc::now().to_rfc3339(),
        });
        let path = self.dir.join(MANIFEST);
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(self.dir)
    }
}

/// Resolves an input that may be given as a file or as the run directory
/// of the command producing it.
pub fn artifact(path: &Path, file: &str, producer: &str) -> Result<PathBuf> {
    let candidate = if path.is_dir() { path.join(file) } else { path.to_path_buf() };
    if !candidate.exists() {
        bail!(
            "missing {} (expected at {}); run `germeval {producer}` first",
            file,
            candidate.display()
        );
    }
    Ok(candidate)
}

/// Like [`artifact`] for inputs that are directories (pools).
pub fn artifact_dir(path: &Path, marker: &str, producer: &str) -> Result<PathBuf> {
    if !path.join(marker).exists() {
        bail!(
            "{} is not a {producer} output (no {marker}); run `germeval {producer}` first",
            path.display()
        );
    }
    Ok(path.to_path_buf())
}
