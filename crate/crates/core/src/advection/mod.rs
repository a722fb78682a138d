//! Flux-form advection of the surface field by analytic flows.
//!
//! Velocities live at cell centres; face velocities are the mean of the two
//! adjacent centres. A cell changes by minus its net boundary flux times its
//! inverse area, and the two polar caps by the longitude sum of the fluxes
//! crossing their rims. Face values are either donor-cell (`upwind`) or
//! third-order WENO reconstructions.

mod flows;
mod ssprk;

pub use flows::{attenuate_flows, attenuation_multiplier, build_analytic_flows, FlowField, FlowParams};
pub use ssprk::{ssprk43, ssprk43_advance};

use thiserror::Error;

use crate::field::MapField;
use crate::grid::SphericalGrid;
use crate::parloop::{Combiner, Executor, IndexSpace, ReductionSpec};

/// Safety factor on the single-stage Courant limit.
pub const CFL_SAFETY: f64 = 0.8;
/// SSP coefficient of the four-stage third-order scheme.
pub const SSPRK43_COEFFICIENT: f64 = 2.0;
/// Smoothness-indicator regularisation in the WENO weights.
pub const WENO_EPSILON: f64 = 1e-6;

// Relative slack when comparing a time step against a limit.
const LIMIT_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdvectionError {
    #[error("realization {realization}: dt = {dt} h exceeds the stability limit {limit} h")]
    CflViolation { realization: usize, dt: f64, limit: f64 },
    #[error("field shape {got:?} does not match flow shape {expected:?}")]
    DimensionMismatch {
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },
    #[error("unknown flow_num_method {0} (expected 1 = upwind or 2 = weno3)")]
    UnknownMethod(i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdvectionMethod {
    Upwind = 1,
    Weno3 = 2,
}

impl AdvectionMethod {
    pub fn from_code(code: i64) -> Result<Self, AdvectionError> {
        match code {
            1 => Ok(Self::Upwind),
            2 => Ok(Self::Weno3),
            other => Err(AdvectionError::UnknownMethod(other)),
        }
    }

    pub fn code(self) -> i64 {
        self as i64
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Upwind => "upwind",
            Self::Weno3 => "weno3",
        }
    }
}

/// Largest stable single-stage step per realization:
/// `0.8 · min(Δθ/|vt|, sinθ·Δφ/|vp|)` over interior cells, `+∞` without flow.
pub fn cfl_dt_limit(grid: &SphericalGrid, flow: &FlowField) -> Vec<f64> {
    let (ntm, _, nr) = flow.vt.dims();
    (0..nr)
        .map(|i| {
            let mut t = f64::INFINITY;
            for k in 0..grid.n_phi() {
                for j in 1..ntm - 1 {
                    let vt = flow.vt.get(j, k, i).abs();
                    let vp = flow.vp.get(j, k, i).abs();
                    if vt > 0.0 {
                        t = t.min(grid.dtheta[j] / vt);
                    }
                    if vp > 0.0 {
                        t = t.min(grid.sin_theta[j] * grid.dp[k] / vp);
                    }
                }
            }
            CFL_SAFETY * t
        })
        .collect()
}

/// WENO3 face value on the downwind side of `centre`, with `upstream` one
/// cell further upwind and `downstream` across the face.
#[inline]
fn weno3_face(upstream: f64, centre: f64, downstream: f64) -> f64 {
    let p0 = 1.5 * centre - 0.5 * upstream;
    let p1 = 0.5 * (centre + downstream);
    let b0 = (centre - upstream) * (centre - upstream);
    let b1 = (downstream - centre) * (downstream - centre);
    let a0 = (1.0 / 3.0) / ((WENO_EPSILON + b0) * (WENO_EPSILON + b0));
    let a1 = (2.0 / 3.0) / ((WENO_EPSILON + b1) * (WENO_EPSILON + b1));
    (a0 * p0 + a1 * p1) / (a0 + a1)
}

// begin upwind kernel
#[inline]
fn upwind_flux(v: f64, len: f64, left: f64, right: f64) -> f64 {
    let q = if v >= 0.0 { left } else { right };
    v * len * q
}

#[inline]
fn upwind_cell(q: f64, dt: f64, inv_area: f64, out_s: f64, in_n: f64, out_e: f64, in_w: f64) -> f64 {
    q - dt * inv_area * ((out_s - in_n) + (out_e - in_w))
}
// end upwind kernel

/// Flux evaluation for one realization.
struct Fluxes<'a> {
    grid: &'a SphericalGrid,
    q: &'a [f64],
    vt: &'a [f64],
    vp: &'a [f64],
    theta_face_len: &'a [f64],
    method: AdvectionMethod,
    ntm: usize,
    n_phi: usize,
}

impl Fluxes<'_> {
    #[inline]
    fn at(&self, j: usize, u: usize) -> usize {
        u * self.ntm + j
    }

    /// Flux in `+θ` through the face between rows `f` and `f + 1` of unique
    /// column `u`.
    #[inline]
    fn theta(&self, f: usize, u: usize) -> f64 {
        let (a, b) = (self.at(f, u), self.at(f + 1, u));
        let v = 0.5 * (self.vt[a] + self.vt[b]);
        let len = self.theta_face_len[f];
        match self.method {
            AdvectionMethod::Upwind => upwind_flux(v, len, self.q[a], self.q[b]),
            AdvectionMethod::Weno3 => {
                let q = if v >= 0.0 {
                    if f >= 1 {
                        weno3_face(self.q[a - 1], self.q[a], self.q[b])
                    } else {
                        self.q[a]
                    }
                } else if f + 2 < self.ntm {
                    weno3_face(self.q[b + 1], self.q[b], self.q[a])
                } else {
                    self.q[b]
                };
                v * len * q
            }
        }
    }

    /// Flux in `+φ` through the east face of unique column `u` at row `j`.
    #[inline]
    fn phi(&self, j: usize, u: usize) -> f64 {
        let e = (u + 1) % self.n_phi;
        let (a, b) = (self.at(j, u), self.at(j, e));
        let v = 0.5 * (self.vp[a] + self.vp[b]);
        let len = self.grid.phi_face_metric[j];
        match self.method {
            AdvectionMethod::Upwind => upwind_flux(v, len, self.q[a], self.q[b]),
            AdvectionMethod::Weno3 => {
                let q = if v >= 0.0 {
                    let w = (u + self.n_phi - 1) % self.n_phi;
                    weno3_face(self.q[self.at(j, w)], self.q[a], self.q[b])
                } else {
                    let ee = (u + 2) % self.n_phi;
                    weno3_face(self.q[self.at(j, ee)], self.q[b], self.q[a])
                };
                v * len * q
            }
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn interior_column(&self, k: usize, dt: f64, out: &mut [f64]) {
        let u = k % self.n_phi;
        let w = (u + self.n_phi - 1) % self.n_phi;
        let mut in_n = self.theta(0, u);
        for j in 1..self.ntm - 1 {
            let out_s = self.theta(j, u);
            let out_e = self.phi(j, u);
            let in_w = self.phi(j, w);
            out[j] = upwind_cell(
                self.q[self.at(j, u)],
                dt,
                self.grid.inv_row_area[j],
                out_s,
                in_n,
                out_e,
                in_w,
            );
            in_n = out_s;
        }
    }
}

const RIM_SUMS: ReductionSpec<2> = ReductionSpec::new([Combiner::Sum, Combiner::Sum]);

fn check_shape(flow: &FlowField, x: &MapField) -> Result<(), AdvectionError> {
    if flow.vt.dims() != x.dims() {
        return Err(AdvectionError::DimensionMismatch {
            expected: flow.vt.dims(),
            got: x.dims(),
        });
    }
    Ok(())
}

/// One forward-Euler stage of conservative advection.
///
/// Fails when `dt` exceeds the unit-Courant bound (`cfl_dt_limit / 0.8`) of
/// any realization.
pub fn advect_step(
    exec: &Executor,
    grid: &SphericalGrid,
    flow: &FlowField,
    x: &MapField,
    dt: f64,
    method: AdvectionMethod,
) -> Result<MapField, AdvectionError> {
    check_shape(flow, x)?;
    for (i, lim) in cfl_dt_limit(grid, flow).into_iter().enumerate() {
        let unit = lim / CFL_SAFETY;
        if dt > unit * (1.0 + LIMIT_SLACK) {
            return Err(AdvectionError::CflViolation {
                realization: i,
                dt,
                limit: unit,
            });
        }
    }
    let mut y = MapField::for_grid(grid, x.nr());
    advect_into(exec, grid, flow, x, dt, method, &mut y);
    Ok(y)
}

pub(crate) fn advect_into(
    exec: &Executor,
    grid: &SphericalGrid,
    flow: &FlowField,
    x: &MapField,
    dt: f64,
    method: AdvectionMethod,
    y: &mut MapField,
) {
    let (ntm, npm, nr) = x.dims();
    let points = ntm * npm;
    let theta_face_len: Vec<f64> = grid
        .sin_theta_face
        .iter()
        .map(|s| s * grid.dp[0])
        .collect();
    let fluxes = |i: usize| Fluxes {
        grid,
        q: x.realization(i),
        vt: flow.vt.realization(i),
        vp: flow.vp.realization(i),
        theta_face_len: &theta_face_len,
        method,
        ntm,
        n_phi: grid.n_phi(),
    };

    let columns = IndexSpace::zero_based(&[nr, npm]);
    exec.par_for_chunks(&columns, y.values_mut(), ntm, |idx, col| {
        let (i, k) = (idx[0] as usize, idx[1] as usize);
        fluxes(i).interior_column(k, dt, col);
    });

    let inv_cap_n = 1.0 / grid.north_cap_area();
    let inv_cap_s = 1.0 / grid.south_cap_area();
    let realizations = IndexSpace::zero_based(&[nr]);
    let rim = IndexSpace::zero_based(&[grid.n_phi()]);
    let inner = IndexSpace::zero_based(&[npm]);
    exec.par_for_nested(&realizations, y.values_mut(), points, |idx, yr| {
        let i = idx[0] as usize;
        let f = fluxes(i);
        let [out_n, in_s] = exec.par_reduce(&rim, &RIM_SUMS, |u| {
            let u = u[0] as usize;
            [f.theta(0, u), f.theta(ntm - 2, u)]
        });
        let north = f.q[0] - dt * inv_cap_n * out_n;
        let south = f.q[ntm - 1] + dt * inv_cap_s * in_s;
        exec.par_for_chunks(&inner, yr, ntm, |_, col| {
            col[0] = north;
            col[ntm - 1] = south;
        });
    });
}
