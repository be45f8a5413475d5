use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cakgcn_core::digest::sha256_file;

pub const MANIFEST_FILE: &str = "manifest.txt";

/// What a command was asked to do and what it will write.
#[derive(Debug, Default)]
pub struct Manifest {
    pub command: String,
    pub config: Vec<(String, String)>,
    pub seeds: Vec<(String, u64)>,
    pub inputs: Vec<(PathBuf, String)>,
    pub artifacts: Vec<PathBuf>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            ..Default::default()
        }
    }

    pub fn config(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.config.push((key.into(), value.to_string()));
        self
    }

    pub fn seed(&mut self, name: &str, seed: u64) -> &mut Self {
        self.seeds.push((name.into(), seed));
        self
    }

    /// Records an input file with its SHA-256.
    pub fn input(&mut self, path: &Path) -> Result<&mut Self> {
        let digest = sha256_file(path)?;
        self.inputs.push((path.to_path_buf(), digest));
        Ok(self)
    }

    /// Records every file directly inside `dir`, in name order.
    pub fn input_dir(&mut self, dir: &Path) -> Result<&mut Self> {
        let mut files: Vec<PathBuf> = fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.file_name().is_some_and(|n| n != MANIFEST_FILE))
            .collect();
        files.sort();
        for f in files {
            self.input(&f)?;
        }
        Ok(self)
    }

    pub fn artifact(&mut self, path: PathBuf) -> &mut Self {
        self.artifacts.push(path);
        self
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command: {}", self.command);
        let _ = writeln!(s, "version: {}", env!("CARGO_PKG_VERSION"));
        for (k, v) in &self.config {
            let _ = writeln!(s, "config.{k}: {v}");
        }
        for (k, v) in &self.seeds {
            let _ = writeln!(s, "seed.{k}: {v}");
        }
        for (p, d) in &self.inputs {
            let _ = writeln!(s, "input: {}\tsha256:{d}", p.display());
        }
        for p in &self.artifacts {
            let _ = writeln!(s, "artifact: {}", p.display());
        }
        s
    }

    /// Creates `dir` and writes the manifest into it.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, self.render()).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
