//! Wall-time accounting by algorithmic component.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use thiserror::Error;

pub const TIMING_HEADER: &str = "label,advection,diffusion,analysis,io,other,total";

#[derive(Debug, Error, PartialEq)]
pub enum TimingError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("malformed timing CSV: {0}")]
    Format(String),
}

/// Named buckets; time outside all of them lands in `other`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bucket {
    Advection,
    Diffusion,
    Analysis,
    Io,
}

/// Seconds per bucket.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TimingReport {
    pub advection: f64,
    pub diffusion: f64,
    pub analysis: f64,
    pub io: f64,
    pub other: f64,
    pub total: f64,
}

impl TimingReport {
    pub fn named_sum(&self) -> f64 {
        self.advection + self.diffusion + self.analysis + self.io
    }

    /// Relative gap between the bucket sum and the total.
    pub fn closure_error(&self) -> f64 {
        if self.total == 0.0 {
            return 0.0;
        }
        ((self.named_sum() + self.other) - self.total).abs() / self.total
    }

    pub fn to_csv_row(&self, label: &str) -> String {
        format!(
            "{label},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}",
            self.advection, self.diffusion, self.analysis, self.io, self.other, self.total
        )
    }

    /// Human-readable breakdown, one bucket per line.
    pub fn summary(&self) -> String {
        let pct = |v: f64| if self.total > 0.0 { 100.0 * v / self.total } else { 0.0 };
        let mut s = String::new();
        for (name, v) in [
            ("advection", self.advection),
            ("diffusion", self.diffusion),
            ("analysis", self.analysis),
            ("io", self.io),
            ("other", self.other),
        ] {
            s.push_str(&format!("{name:<10} {v:>12.4} s {:>6.1} %\n", pct(v)));
        }
        s.push_str(&format!("{:<10} {:>12.4} s", "total", self.total));
        s
    }
}

/// Accumulates bucket times against a running total clock.
#[derive(Debug)]
pub struct Stopwatch {
    start: Instant,
    buckets: [Duration; 4],
}

impl Default for Stopwatch {
    fn default() -> Self {
        Self::new()
    }
}

impl Stopwatch {
    pub fn new() -> Self {
        Self {
            start: Instant::now(),
            buckets: [Duration::ZERO; 4],
        }
    }

    /// Run `f` and charge its wall time to `bucket`.
    pub fn time<T>(&mut self, bucket: Bucket, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.add(bucket, t0.elapsed());
        out
    }

    pub fn add(&mut self, bucket: Bucket, d: Duration) {
        self.buckets[bucket as usize] += d;
    }

    /// Close the books: `other` is the total minus the named buckets.
    pub fn report(&self) -> TimingReport {
        let total = self.start.elapsed().as_secs_f64();
        let [advection, diffusion, analysis, io] = self.buckets.map(|d| d.as_secs_f64());
        let mut r = TimingReport {
            advection,
            diffusion,
            analysis,
            io,
            other: 0.0,
            total,
        };
        r.other = total - r.named_sum();
        r
    }
}

pub fn write_timing_csv(path: &Path, label: &str, report: &TimingReport) -> Result<(), TimingError> {
    let text = format!("{TIMING_HEADER}\n{}\n", report.to_csv_row(label));
    std::fs::write(path, text).map_err(|e| TimingError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Parse the rows of a timing CSV written by [`write_timing_csv`].
pub fn parse_timing_csv(text: &str) -> Result<Vec<(String, TimingReport)>, TimingError> {
    let mut lines = text.lines();
    if lines.next() != Some(TIMING_HEADER) {
        return Err(TimingError::Format("missing header".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 7 {
                return Err(TimingError::Format(format!("expected 7 fields in `{l}`")));
            }
            let v = f[1..]
                .iter()
                .map(|x| x.parse::<f64>().map_err(|_| TimingError::Format(format!("bad number `{x}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((
                f[0].to_string(),
                TimingReport {
                    advection: v[0],
                    diffusion: v[1],
                    analysis: v[2],
                    io: v[3],
                    other: v[4],
                    total: v[5],
                },
            ))
        })
        .collect()
}
