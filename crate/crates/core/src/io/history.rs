//! History text file: one line per analysis record.
//!
//! The first line is a `#` header naming the columns. Each data line holds
//! the simulation time followed by `min max signed pos neg` for every
//! realization, written with 17 significant digits so values read back
//! bit-for-bit.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Columns recorded per realization, in file order.
pub const STAT_COLUMNS: [&str; 5] = ["min", "max", "signed", "pos", "neg"];

#[derive(Debug, Error, PartialEq)]
pub enum HistoryError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Map statistics of one realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizationStats {
    pub min: f64,
    pub max: f64,
    pub signed: f64,
    pub positive: f64,
    pub negative: f64,
}

impl RealizationStats {
    pub fn as_array(&self) -> [f64; 5] {
        [self.min, self.max, self.signed, self.positive, self.negative]
    }

    fn from_slice(v: &[f64]) -> Self {
        Self {
            min: v[0],
            max: v[1],
            signed: v[2],
            positive: v[3],
            negative: v[4],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRecord {
    pub sim_time: f64,
    pub stats: Vec<RealizationStats>,
}

impl HistoryRecord {
    pub fn nr(&self) -> usize {
        self.stats.len()
    }

    /// All values in file column order.
    pub fn columns(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(1 + 5 * self.nr());
        out.push(self.sim_time);
        for s in &self.stats {
            out.extend(s.as_array());
        }
        out
    }
}

/// Column names for `nr` realizations, matching [`HistoryRecord::columns`].
pub fn column_names(nr: usize) -> Vec<String> {
    let mut names = vec!["sim_time".to_string()];
    for i in 0..nr {
        names.extend(STAT_COLUMNS.iter().map(|c| format!("{c}_{i}")));
    }
    names
}

pub fn format_header(nr: usize) -> String {
    format!("# {}", column_names(nr).join(" "))
}

pub fn format_record(rec: &HistoryRecord) -> String {
    rec.columns().iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(" ")
}

/// Append `rec`, writing the header first if the file is new or empty.
pub fn append_history(path: &Path, rec: &HistoryRecord) -> Result<(), HistoryError> {
    let io_err = |e: std::io::Error| HistoryError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(io_err)?;
    let mut text = String::new();
    if f.metadata().map_err(io_err)?.len() == 0 {
        text.push_str(&format_header(rec.nr()));
        text.push('\n');
    }
    text.push_str(&format_record(rec));
    text.push('\n');
    f.write_all(text.as_bytes()).map_err(io_err)
}

/// Parse history text; `#` lines are skipped.
pub fn parse_history(text: &str) -> Result<Vec<HistoryRecord>, HistoryError> {
    let mut out: Vec<HistoryRecord> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let values = raw
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| HistoryError::Parse {
                    line,
                    message: format!("bad number `{t}`"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() < 6 || (values.len() - 1) % 5 != 0 {
            return Err(HistoryError::Parse {
                line,
                message: format!("{} columns is not 1 + 5 per realization", values.len()),
            });
        }
        let rec = HistoryRecord {
            sim_time: values[0],
            stats: values[1..].chunks(5).map(RealizationStats::from_slice).collect(),
        };
        if let Some(first) = out.first() {
            if first.nr() != rec.nr() {
                return Err(HistoryError::Parse {
                    line,
                    message: format!("{} realizations, earlier lines have {}", rec.nr(), first.nr()),
                });
            }
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_history(path: &Path) -> Result<Vec<HistoryRecord>, HistoryError> {
    let text = std::fs::read_to_string(path).map_err(|e| HistoryError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_history(&text)
}
