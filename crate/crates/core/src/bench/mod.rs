//! Roofline microbenchmarks: FMA throughput, streaming bandwidth and the
//! roofline curve they define.

pub mod fma;
pub mod roofline;
pub mod stream;

use std::path::PathBuf;

use thiserror::Error;

pub use fma::{bench_fma, FmaResult, FLOPS_PER_ITEM, MIN_FMA_ITEMS};
pub use roofline::{emit_roofline, roofline_rows, stencil_ai_range, RoofRow, RooflineSample};
pub use stream::{bench_stream, StreamMode, StreamResult, DEFAULT_STREAM_LANES, DEFAULT_STREAM_PASSES};

#[derive(Debug, Error, PartialEq)]
pub enum BenchError {
    #[error("repeats must be at least 1")]
    ZeroRepeats,
    #[error("buffer must have at least one lane and one pass")]
    EmptyBuffer,
    #[error("cannot allocate {0} values")]
    Allocation(usize),
    #[error("timer reported a non-positive duration")]
    Timer,
    #[error("measurement {0} is not positive")]
    NonPositive(f64),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{0}")]
    Format(String),
}

fn alloc(n: usize) -> Result<Vec<f64>, BenchError> {
    let mut v = Vec::new();
    v.try_reserve_exact(n).map_err(|_| BenchError::Allocation(n))?;
    v.resize(n, 0.0);
    Ok(v)
}

fn positive_time(t: f64) -> Result<f64, BenchError> {
    if t > 0.0 && t.is_finite() {
        Ok(t)
    } else {
        Err(BenchError::Timer)
    }
}
