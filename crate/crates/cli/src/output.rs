//! Result records, their serialisations and the config hash.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const HASH_PREFIX: &str = "# config_hash: ";
pub const CONFIG_PREFIX: &str = "# config: ";
pub const WALL_PREFIX: &str = "# wall_time_s: ";

/// SHA-256 of the compact JSON rendering. Keys of `serde_json` maps are
/// sorted, so equal values always render to the same bytes.
pub fn config_hash(config: &Value) -> String {
    hex::encode(Sha256::digest(config.to_string().as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_owned(),
            pass,
            detail: detail.into(),
        }
    }
}

/// Column-major time-series table; the first column is `t`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn with_time(times: Vec<f64>) -> Self {
        Self {
            names: vec!["t".to_owned()],
            columns: vec![times],
        }
    }

    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.columns[0].len());
        self.names.push(name.into());
        self.columns.push(values);
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    /// Columns named `family` or `family.<i>`, in file order.
    pub fn family(&self, family: &str) -> Vec<&[f64]> {
        self.names
            .iter()
            .zip(&self.columns)
            .filter(|(n, _)| n.as_str() == family || n.strip_prefix(family).is_some_and(|rest| rest.starts_with('.')))
            .map(|(_, c)| c.as_slice())
            .collect()
    }
}

/// Everything a scenario produces before serialisation.
#[derive(Debug, Clone, Default)]
pub struct RunResult {
    pub stats: Map<String, Value>,
    pub checks: Vec<Check>,
    pub table: Option<Table>,
}

impl RunResult {
    pub fn stat(&mut self, name: &str, value: impl Into<Value>) {
        self.stats.insert(name.to_owned(), value.into());
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check::new(name, pass, detail));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub config_hash: String,
    pub config: Value,
    pub stats: Map<String, Value>,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

pub fn render_summary(summary: &Summary) -> String {
    let mut s = serde_json::to_string_pretty(summary).expect("summary is plain JSON");
    s.push('\n');
    s
}

pub fn render_csv(table: &Table, config: &Value, hash: &str, wall_time_s: Option<f64>) -> String {
    let mut out = String::with_capacity(table.n_rows() * table.names.len() * 24 + 256);
    out.push_str(HASH_PREFIX);
    out.push_str(hash);
    out.push('\n');
    out.push_str(CONFIG_PREFIX);
    out.push_str(&config.to_string());
    out.push('\n');
    if let Some(w) = wall_time_s {
        out.push_str(&format!("{WALL_PREFIX}{w}\n"));
    }
    out.push_str(&table.names.join(","));
    out.push('\n');
    for r in 0..table.n_rows() {
        for (j, col) in table.columns.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            // 17 significant digits round-trip every f64.
            out.push_str(&format!("{:.16e}", col[r]));
        }
        out.push('\n');
    }
    out
}

/// A CSV file as written by [`render_csv`].
#[derive(Debug, Clone)]
pub struct ParsedCsv {
    pub config_hash: Option<String>,
    pub config: Option<Value>,
    pub table: Table,
}

pub fn parse_csv(text: &str, path: &Path) -> Result<ParsedCsv> {
    let err = |line: usize, message: String| CliError::Input {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut config_hash = None;
    let mut config = None;
    let mut names: Option<Vec<String>> = None;
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if let Some(h) = line.strip_prefix(HASH_PREFIX) {
            config_hash = Some(h.trim().to_owned());
            continue;
        }
        if let Some(c) = line.strip_prefix(CONFIG_PREFIX) {
            config = Some(serde_json::from_str(c).map_err(|e| err(lineno, format!("bad config record: {e}")))?);
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        match &names {
            None => {
                let header: Vec<String> = line.split(',').map(|s| s.trim().to_owned()).collect();
                if header.first().map(String::as_str) != Some("t") {
                    return Err(err(lineno, "first column must be `t`".into()));
                }
                columns = vec![Vec::new(); header.len()];
                names = Some(header);
            }
            Some(header) => {
                let mut n = 0;
                for (j, cell) in line.split(',').enumerate() {
                    let col = columns
                        .get_mut(j)
                        .ok_or_else(|| err(lineno, format!("more cells than the {} header columns", header.len())))?;
                    let v = cell
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| err(lineno, format!("column `{}`: {e}", header[j])))?;
                    col.push(v);
                    n += 1;
                }
                if n != header.len() {
                    return Err(err(lineno, format!("expected {} cells, found {n}", header.len())));
                }
            }
        }
    }
    let names = names.ok_or_else(|| err(0, "no header row".into()))?;
    Ok(ParsedCsv {
        config_hash,
        config,
        table: Table { names, columns },
    })
}

/// Writes `contents` to a sibling temporary file and renames it over
/// `path`, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file_name = path
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("--out {} is not a file path", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp: PathBuf = path.with_file_name(tmp_name);
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io(e)
    })
}
