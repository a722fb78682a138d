//! Roofline curves from measured peaks.

use std::fmt::Write as _;
use std::path::Path;

use super::fma::FLOPS_PER_FMA;
use super::BenchError;

pub const ROOFLINE_HEADER: &str = "ai,flops_roof,bw_min_roof,bw_max_roof";
/// Sweep range in FLOP/byte: `2^-6 ..= 2^6`.
pub const AI_MIN_LOG2: f64 = -6.0;
pub const AI_MAX_LOG2: f64 = 6.0;
/// Sweep points per octave.
pub const POINTS_PER_OCTAVE: usize = 4;

/// FLOPs per interior point of the diffusion stencil in centre-coefficient
/// form (`c_C x + Σ c_n x_n`).
pub const STENCIL_FLOPS_CENTRE_FORM: f64 = 9.0;
/// FLOPs per interior point in the neighbour-difference form used by
/// [`crate::diffusion::apply_diffusion`] (`Σ c_n (x_n − x)`).
pub const STENCIL_FLOPS_DIFFERENCE_FORM: f64 = 11.0;
/// Bytes per interior point when neighbours hit in cache: the five
/// coefficients, the centre value and the result.
pub const STENCIL_BYTES_CACHED: f64 = 7.0 * 8.0;
/// Bytes per interior point when all four neighbours are fetched again.
pub const STENCIL_BYTES_UNCACHED: f64 = 11.0 * 8.0;

/// Arithmetic-intensity range of the diffusion stencil over both FLOP
/// counts and both traffic models.
pub fn stencil_ai_range() -> (f64, f64) {
    (
        STENCIL_FLOPS_CENTRE_FORM / STENCIL_BYTES_UNCACHED,
        STENCIL_FLOPS_DIFFERENCE_FORM / STENCIL_BYTES_CACHED,
    )
}

/// Measured peaks, in GFLOP/s and GB/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RooflineSample {
    pub fp64_gflops: f64,
    pub read_gbs: f64,
    pub write_gbs: f64,
    pub bw_avg: f64,
    pub bw_min: f64,
    pub bw_max: f64,
    pub ai_range: (f64, f64),
}

impl RooflineSample {
    pub fn new(fp64_gflops: f64, read_gbs: f64, write_gbs: f64, ai_range: (f64, f64)) -> Result<Self, BenchError> {
        for v in [fp64_gflops, read_gbs, write_gbs] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(BenchError::NonPositive(v));
            }
        }
        Ok(Self {
            fp64_gflops,
            read_gbs,
            write_gbs,
            bw_avg: 0.5 * (read_gbs + write_gbs),
            bw_min: read_gbs.min(write_gbs),
            bw_max: read_gbs.max(write_gbs),
            ai_range,
        })
    }

    /// Attainable GFLOP/s at intensity `ai` for bandwidth `bw`.
    pub fn roof(&self, bw: f64, ai: f64) -> f64 {
        self.fp64_gflops.min(bw * ai)
    }

    /// Intensity where the average-bandwidth line meets the compute peak.
    pub fn ridge_ai(&self) -> f64 {
        self.fp64_gflops / self.bw_avg
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoofRow {
    pub ai: f64,
    pub flops_roof: f64,
    pub bw_min_roof: f64,
    pub bw_max_roof: f64,
}

/// Log-spaced sweep plus the two annotation intensities, ascending.
pub fn roofline_rows(sample: &RooflineSample) -> Vec<RoofRow> {
    let steps = ((AI_MAX_LOG2 - AI_MIN_LOG2) as usize) * POINTS_PER_OCTAVE;
    let mut ais: Vec<f64> = (0..=steps)
        .map(|n| (AI_MIN_LOG2 + n as f64 / POINTS_PER_OCTAVE as f64).exp2())
        .collect();
    ais.push(sample.ai_range.0);
    ais.push(sample.ai_range.1);
    ais.sort_by(f64::total_cmp);
    ais.dedup();
    ais.into_iter()
        .map(|ai| RoofRow {
            ai,
            flops_roof: sample.roof(sample.bw_avg, ai),
            bw_min_roof: sample.roof(sample.bw_min, ai),
            bw_max_roof: sample.roof(sample.bw_max, ai),
        })
        .collect()
}

/// CSV text: header, rows, then `# key=value` metadata lines.
pub fn format_roofline(sample: &RooflineSample) -> String {
    let mut s = String::new();
    s.push_str(ROOFLINE_HEADER);
    s.push('\n');
    for r in roofline_rows(sample) {
        let _ = writeln!(s, "{:e},{:e},{:e},{:e}", r.ai, r.flops_roof, r.bw_min_roof, r.bw_max_roof);
    }
    for (k, v) in [
        ("fp64_gflops", sample.fp64_gflops),
        ("read_gbs", sample.read_gbs),
        ("write_gbs", sample.write_gbs),
        ("bw_avg", sample.bw_avg),
        ("bw_min", sample.bw_min),
        ("bw_max", sample.bw_max),
        ("ridge_ai", sample.ridge_ai()),
        ("ai_low", sample.ai_range.0),
        ("ai_high", sample.ai_range.1),
    ] {
        let _ = writeln!(s, "# {k}={v:e}");
    }
    let _ = writeln!(s, "# flops_per_fma={FLOPS_PER_FMA}");
    s
}

pub fn emit_roofline(sample: &RooflineSample, path: &Path) -> Result<(), BenchError> {
    std::fs::write(path, format_roofline(sample)).map_err(|e| BenchError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Parse the data rows of a roofline CSV, ignoring metadata lines.
pub fn parse_roofline(text: &str) -> Result<Vec<RoofRow>, BenchError> {
    let mut lines = text.lines();
    if lines.next() != Some(ROOFLINE_HEADER) {
        return Err(BenchError::Format("missing roofline header".into()));
    }
    lines
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let v = l
                .split(',')
                .map(|x| x.parse::<f64>().map_err(|_| BenchError::Format(format!("bad number `{x}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            match v[..] {
                [ai, flops_roof, bw_min_roof, bw_max_roof] => Ok(RoofRow {
                    ai,
                    flops_roof,
                    bw_min_roof,
                    bw_max_roof,
                }),
                _ => Err(BenchError::Format(format!("expected 4 fields in `{l}`"))),
            }
        })
        .collect()
}

/// Number of places where the average roof switches from the bandwidth
/// slope to the compute plateau.
pub fn count_ridges(rows: &[RoofRow], peak: f64) -> usize {
    let flat: Vec<bool> = rows.iter().map(|r| r.flops_roof >= peak).collect();
    flat.windows(2).filter(|w| w[0] != w[1]).count()
}
