//! File output (atomic temp-then-rename writes, CSV, JSON) and the run
//! manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::sha256_hex;
use crate::eit::DetuningGrid;
use crate::storage::TimeHistogram;
use crate::{Error, Result};

/// Write `bytes` to a temporary sibling of `path`, then rename over it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Pretty JSON with a trailing newline; key order follows the type.
pub fn to_json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

/// CSV text with a header row; numbers use the shortest round-trip form.
pub fn csv_bytes(header: &[&str], rows: &[Vec<f64>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::InvalidParameter(format!(
                "CSV row has {} fields for {} columns",
                row.len(),
                header.len()
            )));
        }
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn histogram_csv(hist: &TimeHistogram) -> Result<Vec<u8>> {
    let rows: Vec<Vec<f64>> = hist
        .counts
        .iter()
        .enumerate()
        .map(|(i, c)| vec![hist.bin_center(i), *c])
        .collect();
    csv_bytes(&["time_s", "counts"], &rows)
}

/// Measured spectrum read from `detuning_hz,transmission[,sigma]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumData {
    pub grid: DetuningGrid,
    pub transmission: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
}

/// Parse a spectrum CSV. Errors name the offending row (1-based, header is
/// row 1) and column.
pub fn read_spectrum_csv(path: &Path) -> Result<SpectrumData> {
    let parse_err = |row: usize, column: &str, message: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        message,
    };
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| parse_err(0, "-", e.to_string()))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| parse_err(1, "-", e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let with_sigma = match header.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["detuning_hz", "transmission"] => false,
        ["detuning_hz", "transmission", "sigma"] => true,
        _ => {
            return Err(parse_err(
                1,
                "header",
                format!("expected detuning_hz,transmission[,sigma], found {}", header.join(",")),
            ))
        }
    };
    let mut nu = Vec::new();
    let mut t = Vec::new();
    let mut s = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| parse_err(row, "-", e.to_string()))?;
        if rec.len() != header.len() {
            return Err(parse_err(
                row,
                "-",
                format!("{} fields, expected {}", rec.len(), header.len()),
            ));
        }
        let mut values = [0.0; 3];
        for (k, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(row, &header[k], format!("'{field}' is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(row, &header[k], format!("'{field}' is not finite")));
            }
            values[k] = v;
        }
        if values[1] < 0.0 {
            return Err(parse_err(row, "transmission", "negative transmission".into()));
        }
        if with_sigma && !(values[2] > 0.0) {
            return Err(parse_err(row, "sigma", "uncertainty must be positive".into()));
        }
        nu.push(values[0]);
        t.push(values[1]);
        s.push(values[2]);
    }
    let grid = DetuningGrid::from_values(nu).map_err(|e| parse_err(0, "detuning_hz", e.to_string()))?;
    Ok(SpectrumData {
        grid,
        transmission: t,
        sigma: with_sigma.then_some(s),
    })
}

/// A file with its content hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileRecord {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(Self {
            path: path.to_path_buf(),
            sha256: sha256_hex(&fs::read(path)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    /// Some outputs were written before an error.
    Partial,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

impl From<&Error> for ErrorRecord {
    fn from(e: &Error) -> Self {
        Self {
            kind: e.kind().into(),
            message: e.to_string(),
            exit_code: e.exit_code(),
        }
    }
}

/// Record of one command run, written last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: FileRecord,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub wall_clock_s: f64,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorRecord>,
}
