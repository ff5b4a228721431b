//! CSV tables and JSON sidecars, written atomically.

use std::fs;
use std::path::{Path, PathBuf};

use lightlattice::Error;

use crate::error::CliError;

/// Version of the CSV and JSON layouts.
pub const SCHEMA_VERSION: u32 = 1;

pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Header plus rows; floats carry 17 significant digits. Any non-finite
    /// value aborts the whole table.
    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Core(Error::Numerical(format!("csv encoding: {e}")));
        writer.write_record(&self.header).map_err(fail)?;
        for (r, row) in self.rows.iter().enumerate() {
            let mut fields = Vec::with_capacity(row.len());
            for (c, cell) in row.iter().enumerate() {
                fields.push(match cell {
                    Cell::Float(x) if !x.is_finite() => {
                        return Err(CliError::Core(Error::Numerical(format!(
                            "non-finite value {x} in column {} of row {r}",
                            self.header[c]
                        ))))
                    }
                    Cell::Float(x) => format!("{x:.16e}"),
                    Cell::Int(n) => n.to_string(),
                    Cell::Text(s) => s.clone(),
                });
            }
            writer.write_record(&fields).map_err(fail)?;
        }
        writer
            .into_inner()
            .map_err(|e| CliError::Core(Error::Numerical(format!("csv encoding: {e}"))))
    }
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes(value: &serde_json::Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("json values always serialize");
    bytes.push(b'\n');
    bytes
}

/// Writes every `(name, bytes)` into `dir` through a temporary file and a
/// rename. On failure the files already written by this call are removed.
pub fn write_all(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<(), CliError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written: Vec<PathBuf> = Vec::new();
    for (name, bytes) in files {
        let target = dir.join(name);
        let staging = dir.join(format!(".{name}.partial"));
        let result = fs::write(&staging, bytes)
            .map_err(io(&staging))
            .and_then(|_| fs::rename(&staging, &target).map_err(io(&target)));
        if let Err(e) = result {
            let _ = fs::remove_file(&staging);
            for path in &written {
                let _ = fs::remove_file(path);
            }
            return Err(e);
        }
        written.push(target);
    }
    Ok(())
}
