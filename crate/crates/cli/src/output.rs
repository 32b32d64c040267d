//! Tables, their CSV/JSON encodings, and the manifest written next to them.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value as Json};

use crate::config::Format;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Real(f64),
    Count(u64),
    Flag(bool),
}

impl Value {
    fn csv(&self) -> String {
        match self {
            // shortest round-trip digits, exponent form for very small/large values
            Value::Real(x) => format!("{x:?}"),
            Value::Count(n) => n.to_string(),
            Value::Flag(b) => (*b as u8).to_string(),
        }
    }

    fn json(&self) -> Json {
        match self {
            Value::Real(x) if x.is_finite() => json!(x),
            Value::Real(x) => json!(x.to_string()),
            Value::Count(n) => json!(n),
            Value::Flag(b) => json!(b),
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            Value::Real(x) => *x,
            Value::Count(n) => *n as f64,
            Value::Flag(b) => *b as u8 as f64,
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Real(x)
    }
}

impl From<u64> for Value {
    fn from(n: u64) -> Self {
        Value::Count(n)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Flag(b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i].as_f64()).collect())
    }

    /// Rows as `(x, y, sigma)` triples taken from three named columns.
    pub fn series(&self, x: &str, y: &str, sigma: &str) -> Option<Vec<(f64, f64, f64)>> {
        let (xs, ys, ss) = (self.column(x)?, self.column(y)?, self.column(sigma)?);
        Some(xs.into_iter().zip(ys).zip(ss).map(|((a, b), c)| (a, b, c)).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Value::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Json> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = Map::new();
                for (c, v) in self.columns.iter().zip(row) {
                    obj.insert(c.clone(), v.json());
                }
                Json::Object(obj)
            })
            .collect();
        let mut text = serde_json::to_string_pretty(&rows).expect("plain values serialize");
        text.push('\n');
        text
    }

    pub fn encode(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub rows: usize,
    pub columns: Vec<String>,
}

/// Everything needed to re-run a command: the full scenario as TOML, seeds,
/// and tool version.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub figure: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset_version: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub config_toml: String,
    pub files: Vec<FileEntry>,
    #[serde(skip_serializing_if = "Map::is_empty")]
    pub summary: Map<String, Json>,
}

impl Manifest {
    pub fn new(command: &str, seed: Option<u64>, config_toml: String) -> Self {
        Manifest {
            tool: "g2mix",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            figure: None,
            preset_version: None,
            seed,
            config_toml,
            files: Vec::new(),
            summary: Map::new(),
        }
    }
}

/// Writes `stem.<ext>` for every table plus `manifest_stem.manifest.json` into
/// `dir`; returns the paths written.
pub fn write_outputs(
    dir: &Path,
    manifest_stem: &str,
    tables: &[(&str, &Table)],
    format: Format,
    mut manifest: Manifest,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for (stem, table) in tables {
        let name = format!("{stem}.{}", format.extension());
        write_atomic(&dir.join(&name), &table.encode(format))?;
        manifest.files.push(FileEntry {
            path: name,
            rows: table.rows.len(),
            columns: table.columns.clone(),
        });
        written.push(dir.join(format!("{stem}.{}", format.extension())));
    }
    let manifest_path = dir.join(format!("{manifest_stem}.manifest.json"));
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_atomic(&manifest_path, &text)?;
    written.push(manifest_path);
    Ok(written)
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("partial");
    let io = |e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}
