use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::CliError;

/// An `--out` directory, created on first use.
pub struct OutDir {
    root: Option<PathBuf>,
}

impl OutDir {
    pub fn new(root: Option<&Path>) -> Result<Self, CliError> {
        if let Some(r) = root {
            fs::create_dir_all(r).map_err(|e| CliError::io(r, e))?;
        }
        Ok(Self {
            root: root.map(Path::to_path_buf),
        })
    }

    pub fn path(&self, name: &str) -> Option<PathBuf> {
        self.root.as_ref().map(|r| r.join(name))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        match self.path(name) {
            Some(p) => write_json(&p, value),
            None => Ok(()),
        }
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<(), CliError> {
        match self.path(name) {
            Some(p) => fs::write(&p, text).map_err(|e| CliError::io(&p, e)),
            None => Ok(()),
        }
    }

    /// Echoes the command configuration; no timestamps, so reruns with the
    /// same flags produce the same bytes.
    pub fn write_manifest<T: Serialize>(&self, command: &str, seed: Option<u64>, config: &T) -> Result<(), CliError> {
        let manifest = json!({
            "tool": "pmd",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "seed": seed,
            "config": config,
        });
        self.write_json("manifest.json", &manifest)
    }

    pub fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let Some(p) = self.path(name) else {
            return Ok(());
        };
        write_csv(&p, header, rows)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serialises");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    let wrap = |e: csv::Error| CliError::runtime(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(wrap)?;
    for r in rows {
        w.write_record(r).map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Shortest round-trip rendering; empty for missing values.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
