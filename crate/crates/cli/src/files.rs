//! On-disk formats: matrices as CSV with a `v1..vp` header, structured
//! results as JSON. Every write goes to a temporary sibling first and is
//! renamed into place.

use std::fs;
use std::io::Write;
use std::path::Path;

use cggm::preprocess::Dataset;
use cggm::CggmError;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Ground truth as written by `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub labels: Vec<usize>,
    pub sizes: Vec<usize>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    pub seed: u64,
}

/// Cluster assignment as written by `fit` and `path --select-k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelsFile {
    pub labels: Vec<usize>,
    pub num_clusters: usize,
    pub lambda: f64,
    pub converged: bool,
}

/// Writes `bytes` to `path` atomically: temp file in the same directory,
/// flushed, then renamed over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::io(path, e));
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(CggmError::from)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        source: CggmError::Parse {
            row: e.line(),
            col: e.column(),
            msg: e.to_string(),
        },
    })
}

/// `v1,...,vp` header then one row per matrix row. Floats use Rust's
/// shortest round-trip formatting.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = (1..=m.ncols()).map(|c| format!("v{c}")).collect::<Vec<_>>().join(",");
    out.push('\n');
    for r in 0..m.nrows() {
        let row: Vec<String> = m.row(r).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<(), CliError> {
    write_atomic(path, matrix_csv(m).as_bytes())
}

/// Parses a numeric CSV with a header row. Errors carry the 1-based file
/// line and column.
pub fn parse_matrix_csv(text: &str) -> Result<(Vec<String>, DMatrix<f64>), CggmError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(CggmError::Parse {
            row: 1,
            col: 1,
            msg: "missing header row".into(),
        });
    }
    let p = header.len();
    let mut values = Vec::new();
    let mut n = 0;
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| CggmError::Parse {
            row: line,
            col: 1,
            msg: e.to_string(),
        })?;
        if rec.len() != p {
            return Err(CggmError::Parse {
                row: line,
                col: rec.len().min(p) + 1,
                msg: format!("expected {p} fields, found {}", rec.len()),
            });
        }
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| CggmError::Parse {
                row: line,
                col: c + 1,
                msg: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(CggmError::Parse {
                    row: line,
                    col: c + 1,
                    msg: format!("`{field}` is not finite"),
                });
            }
            values.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(CggmError::Parse {
            row: 2,
            col: 1,
            msg: "no data rows".into(),
        });
    }
    Ok((header, DMatrix::from_row_slice(n, p, &values)))
}

pub fn read_dataset(path: &Path) -> Result<(Vec<String>, Dataset), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let (header, m) = parse_matrix_csv(&text).map_err(|source| CliError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    Ok((header, Dataset::new(m)))
}

/// Dataset CSV under its original column names.
pub fn write_dataset(path: &Path, header: &[String], data: &Dataset) -> Result<(), CliError> {
    let mut out = header.join(",");
    out.push('\n');
    let m = data.values();
    for r in 0..m.nrows() {
        let row: Vec<String> = m.row(r).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}
