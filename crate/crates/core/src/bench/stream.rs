//! Coalesced streaming bandwidth.
//!
//! The buffer holds `m` passes of `n` lanes, element `(pass, lane)` at
//! `pass * n + lane`. The write kernel stores a constant into every element;
//! the read kernel accumulates each lane over all passes and stores one sum
//! per lane into a separate sink.

use std::hint::black_box;
use std::time::Instant;

use crate::parloop::{Executor, IndexSpace};

use super::BenchError;

pub const ELEMENT_BYTES: usize = std::mem::size_of::<f64>();
/// Default lane count: with 8 passes the buffer is 128 MiB, comfortably more
/// than four times a typical last-level cache.
pub const DEFAULT_STREAM_LANES: usize = 1 << 21;
pub const DEFAULT_STREAM_PASSES: usize = 8;

const LANE_BLOCK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamMode {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamResult {
    pub mode: StreamMode,
    pub lanes: usize,
    pub passes: usize,
    pub bytes: u64,
    pub best_seconds: f64,
    pub gbs: f64,
}

/// Bytes moved by one sweep of `lanes × passes` binary64 elements.
pub fn stream_bytes(lanes: usize, passes: usize) -> u64 {
    (lanes * passes * ELEMENT_BYTES) as u64
}

/// Measure read or write bandwidth, best of `repeats`. `lanes` is rounded up
/// to a multiple of the internal lane block.
pub fn bench_stream(
    exec: &Executor,
    lanes: usize,
    passes: usize,
    mode: StreamMode,
    repeats: usize,
) -> Result<StreamResult, BenchError> {
    if repeats == 0 {
        return Err(BenchError::ZeroRepeats);
    }
    if lanes == 0 || passes == 0 {
        return Err(BenchError::EmptyBuffer);
    }
    let lanes = lanes.div_ceil(LANE_BLOCK) * LANE_BLOCK;
    let blocks = lanes / LANE_BLOCK;
    let mut data = super::alloc(lanes * passes)?;
    exec.par_fill(&mut data, |n| (n % 7) as f64);
    let mut sink = super::alloc(lanes)?;
    let mut best = f64::INFINITY;
    for _ in 0..repeats {
        let t0 = Instant::now();
        match mode {
            StreamMode::Write => {
                // Chunk (pass, block) is the contiguous run of one lane block
                // within one pass.
                let space = IndexSpace::zero_based(&[passes, blocks]);
                exec.par_for_chunks(&space, &mut data, LANE_BLOCK, |_, run| run.fill(0.0));
                black_box(&mut data);
            }
            StreamMode::Read => {
                let space = IndexSpace::zero_based(&[blocks]);
                let src = &data;
                exec.par_for_chunks(&space, &mut sink, LANE_BLOCK, |b, acc| {
                    let first = b[0] as usize * LANE_BLOCK;
                    acc.fill(0.0);
                    for pass in 0..passes {
                        let row = &src[pass * lanes + first..pass * lanes + first + LANE_BLOCK];
                        for (a, v) in acc.iter_mut().zip(row) {
                            *a += v;
                        }
                    }
                });
                black_box(&mut sink);
            }
        }
        best = best.min(t0.elapsed().as_secs_f64());
    }
    let best_seconds = super::positive_time(best)?;
    let bytes = stream_bytes(lanes, passes);
    Ok(StreamResult {
        mode,
        lanes,
        passes,
        bytes,
        best_seconds,
        gbs: bytes as f64 / best_seconds / 1e9,
    })
}
