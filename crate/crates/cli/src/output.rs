use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::args::Format;
use crate::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_VAR: &str = "KFLIP_OUT_DIR";

/// Rows with a fixed header.
#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.into_error()))
    }
}

/// A command's result in both renderings.
pub struct Artifact {
    pub name: &'static str,
    pub json: serde_json::Value,
    pub table: Table,
    pub default_format: Format,
    /// Set when a verification found a counterexample.
    pub counterexample: bool,
}

impl Artifact {
    pub fn new<T: Serialize>(
        name: &'static str,
        report: &T,
        table: Table,
        default_format: Format,
    ) -> Result<Self, CliError> {
        Ok(Artifact {
            name,
            json: serde_json::to_value(report)?,
            table,
            default_format,
            counterexample: false,
        })
    }

    pub fn render(&self, format: Option<Format>) -> Result<(Vec<u8>, Format), CliError> {
        let format = format.unwrap_or(self.default_format);
        let bytes = match format {
            Format::Csv => self.table.to_csv()?,
            Format::Json => {
                let mut s = serde_json::to_vec_pretty(&self.json)?;
                s.push(b'\n');
                s
            }
        };
        Ok((bytes, format))
    }
}

fn extension(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

/// Writes to `path` through a temporary file in the same directory.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

pub fn emit(artifact: &Artifact, format: Option<Format>, out: Option<&Path>) -> Result<(), CliError> {
    let (bytes, format) = artifact.render(format)?;
    let target = match out {
        Some(p) => Some(p.to_path_buf()),
        None => std::env::var_os(OUT_DIR_VAR)
            .map(|dir| PathBuf::from(dir).join(format!("{}.{}", artifact.name, extension(format)))),
    };
    match target {
        Some(path) => write_atomic(&path, &bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}
