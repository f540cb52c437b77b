//! Per-invocation bookkeeping: the output directory, the artifacts written
//! into it, the exit-code mapping and the manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

pub const MANIFEST: &str = "manifest.json";

#[derive(Error, Debug)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },

    #[error("malformed CSV in {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },

    #[error(transparent)]
    Core(#[from] kplane::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use kplane::Error as E;
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Json { .. } => 2,
            CliError::Csv { .. } => 2,
            CliError::Core(e) => match e {
                E::Divergence { .. } | E::Quadrature(_) => 3,
                E::Precondition(_) | E::Consistency { .. } => 1,
                E::Domain(_) | E::Invalid(_) | E::Unsupported(_) => 2,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// What a successful command hands back to `main`.
pub struct Outcome {
    /// false when the property the command checks did not hold (exit 1).
    pub passed: bool,
    /// Printed to stdout as pretty JSON.
    pub summary: Value,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config: &'a Value,
    seed: Option<u64>,
    version: &'a str,
    wall_time_seconds: f64,
    exit_code: u8,
    error: Option<String>,
    outputs: &'a [String],
}

pub struct Run {
    command: String,
    out_dir: PathBuf,
    started: Instant,
    outputs: Vec<String>,
    pub config: Value,
    pub seed: Option<u64>,
}

impl Run {
    pub fn new(command: &str, out_dir: PathBuf) -> Self {
        Self {
            command: command.to_string(),
            out_dir,
            started: Instant::now(),
            outputs: Vec::new(),
            config: Value::Null,
            seed: None,
        }
    }

    /// Writes `name` inside the output directory and records it.
    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.out_dir.join(name);
        fs::create_dir_all(&self.out_dir).map_err(|source| CliError::Io {
            path: self.out_dir.clone(),
            source,
        })?;
        fs::write(&path, contents).map_err(|source| CliError::Io { path, source })?;
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable value");
        text.push('\n');
        self.write(name, &text)
    }

    /// Writes the manifest last, listing every artifact of this run.
    pub fn finish(self, exit_code: u8, error: Option<String>) -> CliResult<()> {
        let manifest = Manifest {
            command: &self.command,
            config: &self.config,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION"),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            exit_code,
            error,
            outputs: &self.outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("serializable manifest");
        text.push('\n');
        fs::create_dir_all(&self.out_dir).map_err(|source| CliError::Io {
            path: self.out_dir.clone(),
            source,
        })?;
        let path = self.out_dir.join(MANIFEST);
        fs::write(&path, text).map_err(|source| CliError::Io { path, source })
    }
}

/// Builds a CSV table with a header row and LF line endings.
pub struct Table {
    out: String,
    width: usize,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut out = header.join(",");
        out.push('\n');
        Self {
            out,
            width: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[f64]) {
        debug_assert_eq!(cells.len(), self.width);
        let line: Vec<String> = cells
            .iter()
            .map(|&v| kplane::recon::csv_number(v))
            .collect();
        self.out.push_str(&line.join(","));
        self.out.push('\n');
    }

    pub fn finish(self) -> String {
        self.out
    }
}
