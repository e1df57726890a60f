//! CSV and JSON artifacts plus the run manifest that accompanies them.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Full precision, locale independent: 17 significant digits.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// A CSV table held in memory until it is written or printed.
pub struct Csv {
    header: Vec<String>,
    rows: Vec<String>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_header(header: Vec<String>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, fields: Vec<String>) {
        debug_assert_eq!(fields.len(), self.header.len());
        self.rows.push(fields.join(","));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            s.push_str(row);
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a, P: Serialize> {
    pub command: &'a str,
    pub parameters: &'a P,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub version: &'static str,
    pub outputs: Vec<OutputFile>,
}

/// Collects the files written by one command into `dir`.
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.files.push(OutputFile {
            file: name.to_string(),
            sha256: hex::encode(Sha256::digest(contents.as_bytes())),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        self.write(name, &text)
    }

    /// Writes `<command>.manifest.json` listing every file written so far.
    pub fn finish<P: Serialize>(self, command: &str, parameters: &P, seed: Option<u64>) -> Result<PathBuf, CliError> {
        let manifest = RunManifest {
            command,
            parameters,
            seed,
            version: env!("CARGO_PKG_VERSION"),
            outputs: self.files,
        };
        let path = self.dir.join(format!("{command}.manifest.json"));
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(path)
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) ends output quietly.
pub fn print_stdout(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

pub fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    print_stdout(&(serde_json::to_string_pretty(value)? + "\n"))
}
