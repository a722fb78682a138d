//! Fused multiply-add throughput.
//!
//! Each work item seeds `x` with its global id and `y` with its id within a
//! work group of 64, runs 128 iterations of the two-FMA chain
//! `x = fma(y, x, y); y = fma(x, y, x)` and stores `y`.

use std::hint::black_box;
use std::time::Instant;

use crate::parloop::{Executor, IndexSpace};

use super::BenchError;

pub const FMA_ITERATIONS: usize = 128;
/// FMA instructions in one iteration of the chain.
pub const FMA_PER_ITERATION: u64 = 2;
/// Accounting convention: one FMA is two floating-point operations.
pub const FLOPS_PER_FMA: u64 = 2;
pub const FLOPS_PER_ITEM: u64 = FMA_ITERATIONS as u64 * FMA_PER_ITERATION * FLOPS_PER_FMA;
/// Smallest accepted item count; shorter runs are lost in timer noise.
pub const MIN_FMA_ITEMS: usize = 1 << 20;

const WORK_GROUP: usize = 64;
// Independent chains interleaved per call so the FMA latency is hidden.
const LANES: usize = 8;
const BLOCK: usize = 4096;

// begin fma kernel
#[inline(always)]
fn fma_chain(x: &mut [f64; LANES], y: &mut [f64; LANES]) {
    for _ in 0..FMA_ITERATIONS {
        for l in 0..LANES {
            x[l] = y[l].mul_add(x[l], y[l]);
            y[l] = x[l].mul_add(y[l], x[l]);
        }
    }
}
// end fma kernel

// Inlined into the feature-enabled wrapper so the chain compiles to FMA
// instructions there.
#[inline(always)]
fn run_block_generic(first_id: usize, out: &mut [f64]) {
    for (g, group) in out.chunks_mut(LANES).enumerate() {
        let base = first_id + g * LANES;
        let mut x: [f64; LANES] = std::array::from_fn(|l| (base + l) as f64);
        let mut y: [f64; LANES] = std::array::from_fn(|l| ((base + l) % WORK_GROUP) as f64);
        fma_chain(&mut x, &mut y);
        group.copy_from_slice(&y[..group.len()]);
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "fma")]
unsafe fn run_block_fma(first_id: usize, out: &mut [f64]) {
    run_block_generic(first_id, out)
}

fn run_block(first_id: usize, out: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("fma") {
        // SAFETY: the CPU supports the FMA instructions this enables.
        return unsafe { run_block_fma(first_id, out) };
    }
    run_block_generic(first_id, out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmaResult {
    pub n_items: usize,
    pub flops: u64,
    pub best_seconds: f64,
    pub gflops: f64,
    /// Sum of the stored outputs, kept so the work cannot be elided.
    pub checksum: f64,
}

/// Measure FP64 FMA throughput over `n_items` work items (raised to
/// [`MIN_FMA_ITEMS`]), best of `repeats`.
pub fn bench_fma(exec: &Executor, n_items: usize, repeats: usize) -> Result<FmaResult, BenchError> {
    if repeats == 0 {
        return Err(BenchError::ZeroRepeats);
    }
    let n_items = n_items.max(MIN_FMA_ITEMS).div_ceil(BLOCK) * BLOCK;
    let mut out = super::alloc(n_items)?;
    let blocks = IndexSpace::zero_based(&[n_items / BLOCK]);
    let mut best = f64::INFINITY;
    for _ in 0..repeats {
        let t0 = Instant::now();
        exec.par_for_chunks(&blocks, &mut out, BLOCK, |b, chunk| run_block(b[0] as usize * BLOCK, chunk));
        black_box(&mut out);
        best = best.min(t0.elapsed().as_secs_f64());
    }
    let best_seconds = super::positive_time(best)?;
    let flops = n_items as u64 * FLOPS_PER_ITEM;
    Ok(FmaResult {
        n_items,
        flops,
        best_seconds,
        gflops: flops as f64 / best_seconds / 1e9,
        checksum: out.iter().filter(|v| v.is_finite()).sum(),
    })
}
