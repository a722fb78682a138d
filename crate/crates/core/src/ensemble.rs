//! Multi-realization flux-transport driver.
//!
//! Each realization pairs a diffusion level with an attenuation flag. All of
//! them advance with one shared step (the strictest of their individual
//! limits), using Lie splitting: advection by SSPRK(4,3), then diffusion by
//! one super-time-step.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::advection::{
    attenuate_flows, build_analytic_flows, cfl_dt_limit, ssprk43_advance, AdvectionError, AdvectionMethod,
    FlowField, FlowParams, SSPRK43_COEFFICIENT,
};
use crate::diffusion::{build_diffusion_operator, sts_advance, DiffusionError, DiffusionOperator, Rkl2};
use crate::field::MapField;
use crate::grid::{build_uniform_grid, integrate_map, GridError, SphericalGrid};
use crate::io::{
    append_history, read_map, write_map, write_timing_csv, Bucket, HistoryError, HistoryRecord, InitialMap,
    MapFileError, RealizationStats, RunConfig, Stopwatch, TimingError, TimingReport,
};
use crate::parloop::{Combiner, Executor, IndexSpace, ReductionSpec};
use crate::units::km2_per_s_to_code;

pub const HISTORY_FILE: &str = "history.txt";
pub const TIMING_FILE: &str = "timing.csv";

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("diffusion_levels is empty")]
    EmptyLevels,
    #[error("attenuation_set is empty")]
    EmptyAttenuationSet,
    #[error("no per-realization time step limits")]
    NoLimits,
    #[error("time step limit {0} is not positive")]
    BadLimit(f64),
    #[error("initial map is {got:?}, expected {expected:?} (or a single realization)")]
    InitialMapShape {
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Advection(#[from] AdvectionError),
    #[error(transparent)]
    Diffusion(#[from] DiffusionError),
    #[error(transparent)]
    MapFile(#[from] MapFileError),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error(transparent)]
    Timing(#[from] TimingError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizationParams {
    pub nu_multiplier: f64,
    pub attenuation: bool,
}

/// Enumerate the ensemble: level-major, attenuation off before on.
///
/// Repeated attenuation flags are ignored.
pub fn realization_params(levels: &[f64], attenuation_set: &[bool]) -> Result<Vec<RealizationParams>, EnsembleError> {
    if levels.is_empty() {
        return Err(EnsembleError::EmptyLevels);
    }
    if attenuation_set.is_empty() {
        return Err(EnsembleError::EmptyAttenuationSet);
    }
    let flags: Vec<bool> = [false, true].into_iter().filter(|f| attenuation_set.contains(f)).collect();
    Ok(levels
        .iter()
        .flat_map(|&nu_multiplier| {
            flags.iter().map(move |&attenuation| RealizationParams {
                nu_multiplier,
                attenuation,
            })
        })
        .collect())
}

/// The shared step: the minimum over all realizations.
pub fn global_dt(limits: &[f64]) -> Result<f64, EnsembleError> {
    if limits.is_empty() {
        return Err(EnsembleError::NoLimits);
    }
    if let Some(&bad) = limits.iter().find(|&&l| l.is_nan() || l <= 0.0) {
        return Err(EnsembleError::BadLimit(bad));
    }
    Ok(limits.iter().copied().fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    pub map: MapField,
    pub params: Vec<RealizationParams>,
    pub sim_time: f64,
    pub step_count: usize,
}

impl EnsembleState {
    pub fn nr(&self) -> usize {
        self.params.len()
    }
}

/// Built-in initial field in Gauss: an active-region pair, a decayed
/// unipolar patch and weak polar caps, with net positive flux.
pub fn blob_map(grid: &SphericalGrid, nr: usize) -> MapField {
    const SPOTS: [(f64, f64, f64, f64); 4] = [
        // (colatitude, longitude, peak gauss, angular radius)
        (1.20, 1.00, 900.0, 0.08),
        (1.26, 1.25, -700.0, 0.08),
        (2.05, 4.10, 250.0, 0.20),
        (0.90, 3.00, -120.0, 0.15),
    ];
    let ntm = grid.ntm();
    let mut m = MapField::from_fn(ntm, grid.npm(), nr, |j, k, _| {
        let (t, p) = (grid.theta[j], grid.phi[k]);
        let polar = 6.0 * t.cos().powi(7);
        let spots: f64 = SPOTS
            .iter()
            .map(|&(tc, pc, amp, w)| {
                let c = t.cos() * tc.cos() + t.sin() * tc.sin() * (p - pc).cos();
                let d = c.clamp(-1.0, 1.0).acos();
                amp * (-(d / w).powi(2)).exp()
            })
            .sum();
        polar + spots
    });
    for i in 0..nr {
        let (n, s) = (m.get(0, 0, i), m.get(ntm - 1, 0, i));
        for k in 0..grid.npm() {
            m.set(0, k, i, n);
            m.set(ntm - 1, k, i, s);
        }
    }
    m.refresh_wrap();
    m
}

/// Grid, flows and operators shared by every step of a run.
pub struct Simulation {
    pub grid: SphericalGrid,
    pub params: Vec<RealizationParams>,
    pub flow_params: FlowParams,
    pub base_flow: FlowField,
    pub diffusion: DiffusionOperator,
    pub method: AdvectionMethod,
    pub max_dt: f64,
}

impl Simulation {
    pub fn new(config: &RunConfig) -> Result<Self, EnsembleError> {
        let params = realization_params(&config.diffusion_levels, &config.attenuation_set)?;
        let grid = build_uniform_grid(config.n_theta, config.n_phi)?;
        let nr = params.len();
        let base_nu = km2_per_s_to_code(config.base_nu);
        let nu = MapField::from_fn(grid.ntm(), grid.npm(), nr, |_, _, i| base_nu * params[i].nu_multiplier);
        let diffusion = build_diffusion_operator(&grid, &nu)?;
        let base_flow = build_analytic_flows(&grid, &config.flow, nr);
        Ok(Self {
            grid,
            params,
            flow_params: config.flow,
            base_flow,
            diffusion,
            method: config.flow_num_method,
            max_dt: config.max_dt_hours,
        })
    }

    pub fn nr(&self) -> usize {
        self.params.len()
    }

    /// Initial state from the configured source.
    pub fn initial_state(&self, source: &InitialMap) -> Result<EnsembleState, EnsembleError> {
        let nr = self.nr();
        let map = match source {
            InitialMap::Blob => blob_map(&self.grid, nr),
            InitialMap::File(path) => {
                let m = read_map(path)?;
                let (ntm, npm) = (self.grid.ntm(), self.grid.npm());
                match m.dims() {
                    (a, b, n) if a == ntm && b == npm && n == nr => m,
                    (a, b, 1) if a == ntm && b == npm => MapField::from_fn(ntm, npm, nr, |j, k, _| m.get(j, k, 0)),
                    got => {
                        return Err(EnsembleError::InitialMapShape {
                            expected: (ntm, npm, nr),
                            got,
                        })
                    }
                }
            }
        };
        Ok(self.state_from_map(map))
    }

    pub fn state_from_map(&self, mut map: MapField) -> EnsembleState {
        map.refresh_wrap();
        EnsembleState {
            map,
            params: self.params.clone(),
            sim_time: 0.0,
            step_count: 0,
        }
    }

    /// Flows for the current field: attenuated where the realization asks.
    pub fn flows(&self, state: &EnsembleState) -> FlowField {
        let enabled: Vec<bool> = state.params.iter().map(|p| p.attenuation).collect();
        if enabled.iter().any(|&e| e) {
            attenuate_flows(&self.base_flow, &state.map, &self.flow_params, &enabled)
        } else {
            self.base_flow.clone()
        }
    }

    /// Per-realization step limit: the SSPRK(4,3) advective limit capped by
    /// the configured maximum step. Diffusion never binds.
    pub fn dt_limits(&self, flow: &FlowField) -> Vec<f64> {
        cfl_dt_limit(&self.grid, flow)
            .into_iter()
            .map(|l| (SSPRK43_COEFFICIENT * l).min(self.max_dt))
            .collect()
    }

    /// Advance `state` by `dt` with flows `flow`, charging each half of the
    /// split to its timing bucket.
    pub fn step_with(
        &self,
        exec: &Executor,
        state: &mut EnsembleState,
        flow: &FlowField,
        dt: f64,
        clock: &mut Stopwatch,
    ) -> Result<(), EnsembleError> {
        clock.time(Bucket::Advection, || -> Result<(), EnsembleError> {
            let limit = global_dt(&cfl_dt_limit(&self.grid, flow))? * SSPRK43_COEFFICIENT;
            let substeps = if limit.is_finite() {
                ((dt / limit) * (1.0 - 1e-12)).ceil().max(1.0) as usize
            } else {
                1
            };
            let h = dt / substeps as f64;
            for _ in 0..substeps {
                state.map = ssprk43_advance(exec, &self.grid, flow, &state.map, h, self.method)?;
            }
            Ok(())
        })?;
        clock.time(Bucket::Diffusion, || sts_advance(exec, &self.diffusion, &Rkl2, &mut state.map, dt))?;
        state.map.refresh_wrap();
        state.sim_time += dt;
        state.step_count += 1;
        Ok(())
    }

    /// Advance by `dt`, rebuilding the attenuated flows from the current field.
    pub fn step(&self, exec: &Executor, state: &mut EnsembleState, dt: f64) -> Result<(), EnsembleError> {
        let flow = self.flows(state);
        self.step_with(exec, state, &flow, dt, &mut Stopwatch::new())
    }

    pub fn analyze(&self, exec: &Executor, state: &EnsembleState) -> HistoryRecord {
        analyze(exec, &self.grid, state)
    }
}

const EXTREMA: ReductionSpec<2> = ReductionSpec::new([Combiner::Min, Combiner::Max]);

/// Extrema and flux integrals of every realization.
pub fn analyze(exec: &Executor, grid: &SphericalGrid, state: &EnsembleState) -> HistoryRecord {
    let ntm = grid.ntm();
    let space = IndexSpace::zero_based(&[grid.n_phi(), ntm]);
    let stats = (0..state.nr())
        .map(|i| {
            let b = state.map.realization(i);
            let [min, max] = exec.par_reduce(&space, &EXTREMA, |ix| {
                let v = b[ix[0] as usize * ntm + ix[1] as usize];
                [v, v]
            });
            let flux = integrate_map(exec, grid, b).expect("map matches grid");
            RealizationStats {
                min,
                max,
                signed: flux.signed,
                positive: flux.positive,
                negative: flux.negative,
            }
        })
        .collect();
    HistoryRecord {
        sim_time: state.sim_time,
        stats,
    }
}

/// Everything a finished run produced.
#[derive(Debug)]
pub struct RunOutput {
    pub state: EnsembleState,
    pub history: Vec<HistoryRecord>,
    pub history_path: PathBuf,
    pub map_paths: Vec<PathBuf>,
    pub timing: TimingReport,
    pub timing_path: PathBuf,
}

fn map_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("map_{index:05}.ftmap"))
}

/// Run the configured simulation, writing history, maps and timing under
/// `config.output_dir`.
pub fn run(config: &RunConfig, exec: &Executor) -> Result<RunOutput, EnsembleError> {
    let mut clock = Stopwatch::new();
    let dir = config.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| EnsembleError::Io {
        path: dir.clone(),
        message: e.to_string(),
    })?;
    let history_path = dir.join(HISTORY_FILE);
    let timing_path = dir.join(TIMING_FILE);
    if history_path.exists() {
        std::fs::remove_file(&history_path).map_err(|e| EnsembleError::Io {
            path: history_path.clone(),
            message: e.to_string(),
        })?;
    }

    let sim = Simulation::new(config)?;
    let mut state = clock.time(Bucket::Io, || sim.initial_state(&config.initial_map))?;
    let mut history = Vec::new();
    let mut map_paths = Vec::new();

    let record = |state: &EnsembleState,
                      clock: &mut Stopwatch,
                      history: &mut Vec<HistoryRecord>|
     -> Result<(), EnsembleError> {
        let rec = clock.time(Bucket::Analysis, || sim.analyze(exec, state));
        clock.time(Bucket::Io, || append_history(&history_path, &rec))?;
        history.push(rec);
        Ok(())
    };
    let write = |state: &EnsembleState, index: usize, clock: &mut Stopwatch| -> Result<PathBuf, EnsembleError> {
        let path = map_path(&dir, index);
        clock.time(Bucket::Io, || write_map(&path, &state.map))?;
        Ok(path)
    };

    record(&state, &mut clock, &mut history)?;
    map_paths.push(write(&state, 0, &mut clock)?);

    let duration = config.duration_hours;
    let (mut n_analysis, mut n_output) = (1usize, 1usize);
    while state.sim_time < duration {
        let next_analysis = n_analysis as f64 * config.analysis_cadence_hours;
        let next_output = n_output as f64 * config.output_cadence_hours;
        let flow = clock.time(Bucket::Advection, || sim.flows(&state));
        let dt_max = global_dt(&sim.dt_limits(&flow))?;
        let target = (state.sim_time + dt_max).min(next_analysis).min(next_output).min(duration);
        let dt = target - state.sim_time;
        sim.step_with(exec, &mut state, &flow, dt, &mut clock)?;
        state.sim_time = target;
        let mut recorded = false;
        if target >= next_analysis {
            record(&state, &mut clock, &mut history)?;
            recorded = true;
            n_analysis += 1;
        }
        if target >= next_output {
            map_paths.push(write(&state, n_output, &mut clock)?);
            n_output += 1;
        }
        if target >= duration && !recorded {
            record(&state, &mut clock, &mut history)?;
        }
    }

    let timing = clock.report();
    write_timing_csv(&timing_path, config.flow_num_method.name(), &timing)?;
    Ok(RunOutput {
        state,
        history,
        history_path,
        map_paths,
        timing,
        timing_path,
    })
}
