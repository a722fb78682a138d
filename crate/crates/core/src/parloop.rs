//! Data-parallel loop layer modelled on Fortran's `do concurrent`.
//!
//! Every loop nest in the solver goes through an [`Executor`]:
//!
//! - [`Executor::par_for`] visits each multi-index of an [`IndexSpace`] once.
//!   Kernels that need to write must do so through thread-safe state, or use
//!   the chunked variants below which hand each index its own output slice.
//! - [`Executor::par_for_chunks`] / [`Executor::par_fill`] are the disjoint-write
//!   forms: the output buffer is partitioned so that index `n` owns chunk `n`.
//! - [`Executor::par_reduce`] combines per-index contributions into several
//!   accumulators at once (the `reduce(+:fn,fs)` clause).
//! - [`Executor::par_for_nested`] distributes an outer space over workers while
//!   each outer body is free to run its own inner reductions and loops.
//!
//! In deterministic mode reductions use a pairwise combine tree whose shape
//! depends only on the length of the index space, so results are bitwise
//! identical for any worker count. Locality specifiers (`local`, `shared`)
//! have no counterpart here: kernels are plain closures over borrowed data.

use rayon::prelude::*;
use thiserror::Error;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "FLUXPORT_WORKERS";

/// Length of the serial leaves of the deterministic reduction tree.
///
/// Spaces no longer than this are reduced strictly left to right, which makes
/// small reductions bitwise equal to a plain serial loop.
pub const REDUCE_LEAF: usize = 4096;

const MAX_RANK: usize = 3;
const MIN_GRAIN: usize = 256;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParloopError {
    #[error("index space must have 1 to 3 dimensions, got {0}")]
    BadRank(usize),
    #[error("dimension {dim}: lower bound {lower} exceeds upper bound {upper} + 1")]
    BadBounds { dim: usize, lower: i64, upper: i64 },
    #[error("worker count must be a positive integer, got {0:?}")]
    BadWorkerCount(String),
    #[error("failed to start worker pool: {0}")]
    Pool(String),
}

/// Rectangular multi-dimensional range with inclusive bounds.
///
/// The first dimension is the outermost (slowest varying) one, so
/// `IndexSpace::new(&[(1, nr), (2, npm - 1), (2, ntm - 1)])` corresponds to
/// `do concurrent (i=1:nr, k=2:npm-1, j=2:ntm-1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSpace {
    rank: usize,
    lower: [i64; MAX_RANK],
    extent: [usize; MAX_RANK],
}

impl IndexSpace {
    pub fn new(dims: &[(i64, i64)]) -> Result<Self, ParloopError> {
        if dims.is_empty() || dims.len() > MAX_RANK {
            return Err(ParloopError::BadRank(dims.len()));
        }
        let mut lower = [0; MAX_RANK];
        let mut extent = [1; MAX_RANK];
        for (d, &(lo, hi)) in dims.iter().enumerate() {
            if lo > hi + 1 {
                return Err(ParloopError::BadBounds {
                    dim: d,
                    lower: lo,
                    upper: hi,
                });
            }
            lower[d] = lo;
            extent[d] = (hi + 1 - lo) as usize;
        }
        Ok(Self {
            rank: dims.len(),
            lower,
            extent,
        })
    }

    /// One-dimensional inclusive range `lo..=hi`.
    pub fn range(lo: i64, hi: i64) -> Result<Self, ParloopError> {
        Self::new(&[(lo, hi)])
    }

    /// Zero-based half-open ranges `0..n` in every dimension.
    pub fn zero_based(extents: &[usize]) -> Self {
        let dims: Vec<(i64, i64)> = extents.iter().map(|&n| (0, n as i64 - 1)).collect();
        Self::new(&dims).expect("zero-based extents are always valid")
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Inclusive bounds of dimension `d`.
    pub fn bounds(&self, d: usize) -> (i64, i64) {
        (self.lower[d], self.lower[d] + self.extent[d] as i64 - 1)
    }

    /// Total number of iterations.
    pub fn len(&self) -> usize {
        self.extent[..self.rank].iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Multi-index of the `lin`-th iteration in ascending serial order.
    pub fn index_of(&self, mut lin: usize) -> [i64; MAX_RANK] {
        let mut idx = [0i64; MAX_RANK];
        for d in (0..self.rank).rev() {
            let e = self.extent[d];
            idx[d] = self.lower[d] + (lin % e) as i64;
            lin /= e;
        }
        idx
    }

    /// Visit every index serially in ascending order.
    pub fn for_each_serial(&self, mut f: impl FnMut(&[i64])) {
        for lin in 0..self.len() {
            let idx = self.index_of(lin);
            f(&idx[..self.rank]);
        }
    }
}

/// Associative, commutative combiner with a neutral element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combiner {
    Sum,
    Min,
    Max,
}

impl Combiner {
    pub fn identity(self) -> f64 {
        match self {
            Combiner::Sum => 0.0,
            Combiner::Min => f64::INFINITY,
            Combiner::Max => f64::NEG_INFINITY,
        }
    }

    #[inline]
    pub fn combine(self, a: f64, b: f64) -> f64 {
        match self {
            Combiner::Sum => a + b,
            Combiner::Min => a.min(b),
            Combiner::Max => a.max(b),
        }
    }
}

/// A fixed set of `N` accumulators reduced together.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReductionSpec<const N: usize> {
    pub combiners: [Combiner; N],
}

impl<const N: usize> ReductionSpec<N> {
    pub const fn new(combiners: [Combiner; N]) -> Self {
        Self { combiners }
    }

    pub fn identities(&self) -> [f64; N] {
        self.combiners.map(Combiner::identity)
    }

    #[inline]
    fn merge(&self, acc: &mut [f64; N], other: &[f64; N]) {
        for n in 0..N {
            acc[n] = self.combiners[n].combine(acc[n], other[n]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecutorConfig {
    pub worker_count: usize,
    /// Use the worker-count-independent combine tree for reductions.
    pub deterministic: bool,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        Self {
            worker_count: available_workers(),
            deterministic: true,
        }
    }
}

impl ExecutorConfig {
    pub fn new(worker_count: usize, deterministic: bool) -> Self {
        Self {
            worker_count: worker_count.max(1),
            deterministic,
        }
    }
}

/// Number of hardware execution units, or 1 when unknown.
pub fn available_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn parse_workers(text: &str) -> Result<usize, ParloopError> {
    match text.trim().parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(ParloopError::BadWorkerCount(text.to_string())),
    }
}

/// Resolve the worker count: explicit setting, then `FLUXPORT_WORKERS`,
/// then the hardware default.
pub fn resolve_worker_count(
    explicit: Option<usize>,
    env_value: Option<&str>,
) -> Result<usize, ParloopError> {
    if let Some(n) = explicit {
        if n == 0 {
            return Err(ParloopError::BadWorkerCount("0".into()));
        }
        return Ok(n);
    }
    match env_value {
        Some(v) => parse_workers(v),
        None => Ok(available_workers()),
    }
}

/// Reads [`WORKERS_ENV`] and resolves the worker count against `explicit`.
pub fn worker_count_from_env(explicit: Option<usize>) -> Result<usize, ParloopError> {
    let env = std::env::var(WORKERS_ENV).ok();
    resolve_worker_count(explicit, env.as_deref())
}

/// Owns a worker pool and runs parallel regions on it.
pub struct Executor {
    config: ExecutorConfig,
    pool: rayon::ThreadPool,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor").field("config", &self.config).finish()
    }
}

impl Executor {
    pub fn new(config: ExecutorConfig) -> Result<Self, ParloopError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.worker_count.max(1))
            .thread_name(|i| format!("fluxport-worker-{i}"))
            .build()
            .map_err(|e| ParloopError::Pool(e.to_string()))?;
        Ok(Self { config, pool })
    }

    /// Single worker, deterministic reductions.
    pub fn serial() -> Self {
        Self::new(ExecutorConfig::new(1, true)).expect("single-thread pool")
    }

    pub fn with_workers(worker_count: usize, deterministic: bool) -> Result<Self, ParloopError> {
        Self::new(ExecutorConfig::new(worker_count, deterministic))
    }

    pub fn config(&self) -> ExecutorConfig {
        self.config
    }

    pub fn worker_count(&self) -> usize {
        self.config.worker_count
    }

    pub fn is_deterministic(&self) -> bool {
        self.config.deterministic
    }

    fn grain(&self, n: usize) -> usize {
        (n / (self.config.worker_count * 8)).clamp(1, MIN_GRAIN)
    }

    /// Visit every index of `space` exactly once.
    pub fn par_for<F>(&self, space: &IndexSpace, kernel: F)
    where
        F: Fn(&[i64]) + Sync + Send,
    {
        let n = space.len();
        if n == 0 {
            return;
        }
        let rank = space.rank();
        let grain = self.grain(n);
        self.pool.install(|| {
            (0..n)
                .into_par_iter()
                .with_min_len(grain)
                .for_each(|lin| {
                    let idx = space.index_of(lin);
                    kernel(&idx[..rank]);
                })
        });
    }

    /// Disjoint-write loop: `out` is split into `space.len()` chunks of
    /// `chunk_len` elements and the kernel for the `n`-th index (in ascending
    /// order) receives chunk `n`.
    pub fn par_for_chunks<T, F>(&self, space: &IndexSpace, out: &mut [T], chunk_len: usize, kernel: F)
    where
        T: Send,
        F: Fn(&[i64], &mut [T]) + Sync + Send,
    {
        let n = space.len();
        assert_eq!(
            out.len(),
            n * chunk_len,
            "output length must equal iteration count times chunk length"
        );
        if n == 0 || chunk_len == 0 {
            return;
        }
        let rank = space.rank();
        self.pool.install(|| {
            out.par_chunks_mut(chunk_len)
                .enumerate()
                .for_each(|(lin, chunk)| {
                    let idx = space.index_of(lin);
                    kernel(&idx[..rank], chunk);
                })
        });
    }

    /// `out[n] = kernel(n)` for every element.
    pub fn par_fill<T, F>(&self, out: &mut [T], kernel: F)
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        let grain = self.grain(out.len()).max(MIN_GRAIN);
        self.pool.install(|| {
            out.par_iter_mut()
                .with_min_len(grain)
                .enumerate()
                .for_each(|(n, o)| *o = kernel(n))
        });
    }

    /// Outer-parallel, inner-reduction topology.
    ///
    /// Outer indices are spread over workers; each body owns the `chunk_len`
    /// slice of `out` belonging to its outer index and may itself call
    /// [`Executor::par_reduce`] or [`Executor::par_for_chunks`]. Inner
    /// reductions complete before the body continues, so their results can
    /// be consumed by the write loop that follows.
    pub fn par_for_nested<T, F>(&self, outer: &IndexSpace, out: &mut [T], chunk_len: usize, body: F)
    where
        T: Send,
        F: Fn(&[i64], &mut [T]) + Sync + Send,
    {
        self.par_for_chunks(outer, out, chunk_len, body)
    }

    /// Reduce per-index contributions into `N` accumulators.
    pub fn par_reduce<const N: usize, F>(
        &self,
        space: &IndexSpace,
        spec: &ReductionSpec<N>,
        kernel: F,
    ) -> [f64; N]
    where
        F: Fn(&[i64]) -> [f64; N] + Sync + Send,
    {
        let n = space.len();
        if n == 0 {
            return spec.identities();
        }
        let leaf = |lo: usize, hi: usize| -> [f64; N] {
            let mut acc = spec.identities();
            let rank = space.rank();
            for lin in lo..hi {
                let idx = space.index_of(lin);
                let c = kernel(&idx[..rank]);
                spec.merge(&mut acc, &c);
            }
            acc
        };
        if self.config.deterministic {
            if n <= REDUCE_LEAF {
                return leaf(0, n);
            }
            self.pool.install(|| tree_reduce(spec, 0, n, &leaf))
        } else {
            let workers = self.config.worker_count.min(n);
            let per = n.div_ceil(workers);
            let partials: Vec<[f64; N]> = self.pool.install(|| {
                (0..workers)
                    .into_par_iter()
                    .map(|w| leaf((w * per).min(n), ((w + 1) * per).min(n)))
                    .collect()
            });
            let mut acc = spec.identities();
            for p in &partials {
                spec.merge(&mut acc, p);
            }
            acc
        }
    }
}

fn tree_reduce<const N: usize, L>(spec: &ReductionSpec<N>, lo: usize, hi: usize, leaf: &L) -> [f64; N]
where
    L: Fn(usize, usize) -> [f64; N] + Sync,
{
    if hi - lo <= REDUCE_LEAF {
        return leaf(lo, hi);
    }
    let mid = lo + (hi - lo) / 2;
    let (mut a, b) = rayon::join(
        || tree_reduce(spec, lo, mid, leaf),
        || tree_reduce(spec, mid, hi, leaf),
    );
    spec.merge(&mut a, &b);
    a
}
