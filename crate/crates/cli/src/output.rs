use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;
use crate::Format;

/// The deterministic part of a run: identical inputs give identical bytes.
#[derive(Debug, Serialize)]
pub struct Artifacts {
    pub command: &'static str,
    pub config_hash: String,
    pub config: Value,
    pub result: Value,
    /// `(suffix, table)`; the empty suffix is the main table.
    #[serde(skip)]
    pub csv: Vec<(&'static str, String)>,
}

/// Run facts that vary between identical runs; written beside the payload.
#[derive(Debug, Serialize)]
pub struct Metadata {
    pub command: &'static str,
    pub timestamp_unix: u64,
    pub wall_seconds: f64,
    pub workers: Option<usize>,
    pub version: &'static str,
}

impl Metadata {
    pub fn new(command: &'static str, start: Instant, workers: Option<usize>) -> Self {
        Self {
            command,
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            wall_seconds: start.elapsed().as_secs_f64(),
            workers,
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let err = |source| CliError::Write {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(err)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(err)?;
    tmp.write_all(contents.as_bytes()).map_err(err)?;
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

impl Artifacts {
    pub fn payload(&self) -> Result<String, CliError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Without a prefix the payload and tables go to stdout and the metadata
    /// is dropped.
    pub fn emit(&self, prefix: Option<&Path>, format: Format, metadata: &Metadata) -> Result<(), CliError> {
        let json = matches!(format, Format::Json | Format::Both);
        let csv = matches!(format, Format::Csv | Format::Both);
        let Some(prefix) = prefix else {
            let mut out = std::io::stdout().lock();
            let mut text = String::new();
            if json {
                text.push_str(&self.payload()?);
            }
            if csv {
                for (_, table) in &self.csv {
                    text.push_str(table);
                }
            }
            out.write_all(text.as_bytes()).map_err(|source| CliError::Write {
                path: "stdout".into(),
                source,
            })?;
            return Ok(());
        };
        if json {
            write_atomic(&with_suffix(prefix, ".json"), &self.payload()?)?;
        }
        if csv {
            for (suffix, table) in &self.csv {
                let ext = if suffix.is_empty() {
                    ".csv".to_owned()
                } else {
                    format!(".{suffix}.csv")
                };
                write_atomic(&with_suffix(prefix, &ext), table)?;
            }
        }
        let mut meta = serde_json::to_string_pretty(metadata)?;
        meta.push('\n');
        write_atomic(&with_suffix(prefix, ".meta.json"), &meta)
    }
}
