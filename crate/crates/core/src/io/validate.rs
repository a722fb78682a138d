//! Compare a candidate history against a reference under a relative
//! tolerance.

use std::fmt;
use std::path::Path;

use thiserror::Error;

use super::history::{column_names, read_history, HistoryError, HistoryRecord};

pub const DEFAULT_TOLERANCE: f64 = 1e-5;
/// Reference magnitudes below this are treated as this value.
pub const ABSOLUTE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ValidateError {
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error("record count differs: candidate {candidate}, reference {reference}")]
    RecordCount { candidate: usize, reference: usize },
    #[error("realization count differs: candidate {candidate}, reference {reference}")]
    RealizationCount { candidate: usize, reference: usize },
    #[error("tolerance must be a non-negative number, got {0}")]
    BadTolerance(f64),
}

/// Worst relative error seen in one column.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnReport {
    pub column: String,
    pub worst_error: f64,
    /// Index of the record holding the worst error.
    pub record: usize,
    pub candidate: f64,
    pub reference: f64,
}

impl ColumnReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.worst_error <= tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub tol: f64,
    pub columns: Vec<ColumnReport>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.columns.iter().all(|c| c.passed(self.tol))
    }

    pub fn worst_error(&self) -> f64 {
        self.columns.iter().map(|c| c.worst_error).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ColumnReport> {
        self.columns.iter().filter(|c| !c.passed(self.tol))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:>12} {:>7} {:>24} {:>24}  status", "column", "worst_rel", "record", "candidate", "reference")?;
        for c in &self.columns {
            writeln!(
                f,
                "{:<12} {:>12.3e} {:>7} {:>24.16e} {:>24.16e}  {}",
                c.column,
                c.worst_error,
                c.record,
                c.candidate,
                c.reference,
                if c.passed(self.tol) { "ok" } else { "FAIL" }
            )?;
        }
        write!(
            f,
            "{} at tol {:e}: worst relative error {:e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.tol,
            self.worst_error()
        )
    }
}

/// Relative error of `c` against `r` with the absolute floor.
pub fn relative_error(c: f64, r: f64) -> f64 {
    if c == r {
        return 0.0;
    }
    (c - r).abs() / r.abs().max(ABSOLUTE_FLOOR)
}

pub fn validate_records(
    candidate: &[HistoryRecord],
    reference: &[HistoryRecord],
    tol: f64,
) -> Result<ValidationReport, ValidateError> {
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(ValidateError::BadTolerance(tol));
    }
    if candidate.len() != reference.len() {
        return Err(ValidateError::RecordCount {
            candidate: candidate.len(),
            reference: reference.len(),
        });
    }
    let nr = reference.first().map_or(0, HistoryRecord::nr);
    for (c, r) in candidate.iter().zip(reference) {
        if c.nr() != r.nr() || r.nr() != nr {
            return Err(ValidateError::RealizationCount {
                candidate: c.nr(),
                reference: r.nr(),
            });
        }
    }
    let mut columns: Vec<ColumnReport> = column_names(nr)
        .into_iter()
        .map(|column| ColumnReport {
            column,
            worst_error: 0.0,
            record: 0,
            candidate: 0.0,
            reference: 0.0,
        })
        .collect();
    for (n, (c, r)) in candidate.iter().zip(reference).enumerate() {
        for (col, (cv, rv)) in columns.iter_mut().zip(c.columns().into_iter().zip(r.columns())) {
            let e = relative_error(cv, rv);
            if n == 0 || e.is_nan() || e > col.worst_error {
                *col = ColumnReport {
                    column: std::mem::take(&mut col.column),
                    worst_error: if e.is_nan() { f64::INFINITY } else { e },
                    record: n,
                    candidate: cv,
                    reference: rv,
                };
            }
        }
    }
    Ok(ValidationReport { tol, columns })
}

pub fn validate_files(candidate: &Path, reference: &Path, tol: f64) -> Result<ValidationReport, ValidateError> {
    let c = read_history(candidate)?;
    let r = read_history(reference)?;
    validate_records(&c, &r, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::history::RealizationStats;

    fn records(n: usize, nr: usize) -> Vec<HistoryRecord> {
        (0..n)
            .map(|t| HistoryRecord {
                sim_time: t as f64,
                stats: (0..nr)
                    .map(|i| RealizationStats {
                        min: -3.0 - i as f64,
                        max: 5.0 + t as f64,
                        signed: 1e-20,
                        positive: 12.5,
                        negative: -12.5,
                    })
                    .collect(),
            })
            .collect()
    }

    #[test]
    fn identical_records_pass_with_zero_error() {
        let r = records(4, 2);
        let rep = validate_records(&r, &r, DEFAULT_TOLERANCE).unwrap();
        assert!(rep.passed());
        assert_eq!(rep.worst_error(), 0.0);
        assert_eq!(rep.columns.len(), 11);
    }

    #[test]
    fn perturbation_names_column_and_record() {
        let r = records(4, 2);
        let mut c = r.clone();
        c[2].stats[1].positive *= 1.0 + 2e-5;
        let rep = validate_records(&c, &r, DEFAULT_TOLERANCE).unwrap();
        assert!(!rep.passed());
        let bad: Vec<_> = rep.failures().collect();
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].column, "pos_1");
        assert_eq!(bad[0].record, 2);
        assert!((bad[0].worst_error - 2e-5).abs() < 1e-12);
        assert!(rep.to_string().contains("FAIL"));
        assert!(validate_records(&c, &r, 1e-3).unwrap().passed());
    }

    #[test]
    fn tiny_reference_uses_absolute_floor() {
        assert!((relative_error(1e-18, 1e-20) - 0.99e-6).abs() < 1e-15);
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!(relative_error(1.0 + 1e-6, 1.0) < 1.01e-6);
    }

    #[test]
    fn nan_fails() {
        let r = records(2, 1);
        let mut c = r.clone();
        c[1].stats[0].max = f64::NAN;
        assert!(!validate_records(&c, &r, 1.0).unwrap().passed());
    }

    #[test]
    fn structural_mismatches() {
        let r = records(3, 2);
        assert!(matches!(
            validate_records(&r[..2], &r, 1e-5),
            Err(ValidateError::RecordCount { candidate: 2, reference: 3 })
        ));
        assert!(matches!(
            validate_records(&records(3, 1), &r, 1e-5),
            Err(ValidateError::RealizationCount { .. })
        ));
        assert!(matches!(validate_records(&r, &r, -1.0), Err(ValidateError::BadTolerance(_))));
    }
}
