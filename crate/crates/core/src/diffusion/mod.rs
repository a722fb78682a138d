//! Surface diffusion `∇·(ν∇B)` as a five-point stencil on the sphere.
//!
//! The operator is a conservative finite-volume discretization on the unit
//! sphere. For every interior point the five coefficients are stored in the
//! Fortran-style array `coef(j, k, c, i)` (`c = 0..5` for the west, north,
//! centre, south and east neighbours). Face diffusivities are arithmetic means
//! of the adjacent cell values. The pole rows are set from longitude sums of
//! the fluxes into each polar cap.

mod sts;

pub use sts::{sts_advance, Rkl2, StsReport, SuperStepper};

use thiserror::Error;

use crate::field::MapField;
use crate::grid::SphericalGrid;
use crate::parloop::{Combiner, Executor, IndexSpace, ReductionSpec};

/// Margin applied to the Gershgorin stability bound.
pub const EXPLICIT_DT_SAFETY: f64 = 0.95;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffusionError {
    #[error("diffusivity must be positive and finite, got {value} at (j={j}, k={k}, i={i})")]
    BadDiffusivity { j: usize, k: usize, i: usize, value: f64 },
    #[error("field shape {got:?} does not match operator shape {expected:?}")]
    DimensionMismatch {
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },
    #[error("time step must be finite and non-negative, got {0}")]
    BadTimeStep(f64),
}

/// Stencil position of each coefficient.
pub mod stencil {
    pub const WEST: usize = 0;
    pub const NORTH: usize = 1;
    pub const CENTRE: usize = 2;
    pub const SOUTH: usize = 3;
    pub const EAST: usize = 4;
}

#[derive(Debug, Clone)]
pub struct DiffusionOperator {
    ntm: usize,
    npm: usize,
    nr: usize,
    coef: Vec<f64>,
    nu: Vec<f64>,
    dp: Vec<f64>,
    pub npole_fac: Vec<f64>,
    pub spole_fac: Vec<f64>,
    explicit_dt: Vec<f64>,
}

/// Build the operator for per-point diffusivities `nu` (same layout as a
/// [`MapField`] with `nr` realizations).
pub fn build_diffusion_operator(
    grid: &SphericalGrid,
    nu: &MapField,
) -> Result<DiffusionOperator, DiffusionError> {
    let (ntm, npm, nr) = nu.dims();
    if ntm != grid.ntm() || npm != grid.npm() {
        return Err(DiffusionError::DimensionMismatch {
            expected: (grid.ntm(), grid.npm(), nr),
            got: nu.dims(),
        });
    }
    for i in 0..nr {
        for k in 0..npm {
            for j in 0..ntm {
                let v = nu.get(j, k, i);
                if !(v.is_finite() && v > 0.0) {
                    return Err(DiffusionError::BadDiffusivity { j, k, i, value: v });
                }
            }
        }
    }

    let n_phi = grid.n_phi();
    let mut coef = vec![0.0; ntm * npm * 5 * nr];
    let cidx = |j: usize, k: usize, c: usize, i: usize| ((i * 5 + c) * npm + k) * ntm + j;
    let mut npole_fac = vec![0.0; nr];
    let mut spole_fac = vec![0.0; nr];
    let mut explicit_dt = vec![0.0; nr];

    let dth = grid.dtheta[0];
    for i in 0..nr {
        for k in 0..npm {
            let u = grid.wrap_col(k, 0);
            let w = grid.wrap_col(u, -1);
            let e = grid.wrap_col(u, 1);
            let dph = grid.dp[u];
            for j in 1..ntm - 1 {
                let nu_c = nu.get(j, u, i);
                let nu_n = 0.5 * (nu.get(j - 1, u, i) + nu_c);
                let nu_s = 0.5 * (nu_c + nu.get(j + 1, u, i));
                let nu_w = 0.5 * (nu.get(j, w, i) + nu_c);
                let nu_e = 0.5 * (nu_c + nu.get(j, e, i));
                let st = grid.sin_theta[j];
                let zonal = 1.0 / (st * st * dph * dph);
                let merid = dph / (dth * grid.row_area[j]);
                let c_w = nu_w * zonal;
                let c_e = nu_e * zonal;
                let c_n = nu_n * grid.sin_theta_face[j - 1] * merid;
                let c_s = nu_s * grid.sin_theta_face[j] * merid;
                coef[cidx(j, k, stencil::WEST, i)] = c_w;
                coef[cidx(j, k, stencil::NORTH, i)] = c_n;
                coef[cidx(j, k, stencil::SOUTH, i)] = c_s;
                coef[cidx(j, k, stencil::EAST, i)] = c_e;
                coef[cidx(j, k, stencil::CENTRE, i)] = -(c_w + c_n + c_s + c_e);
            }
        }

        // The pair sum (ν(pole) + ν(next row)) is twice the face diffusivity,
        // hence the factor ½.
        let nf = 0.5 * grid.sin_theta_face[0] / (dth * grid.north_cap_area());
        let sf = 0.5 * grid.sin_theta_face[ntm - 2] / (dth * grid.south_cap_area());
        npole_fac[i] = nf;
        spole_fac[i] = sf;
        let (mut dn, mut ds) = (0.0, 0.0);
        for u in 0..n_phi {
            dn += (nu.get(0, u, i) + nu.get(1, u, i)) * grid.dp[u];
            ds += (nu.get(ntm - 2, u, i) + nu.get(ntm - 1, u, i)) * grid.dp[u];
        }
        for k in 0..npm {
            coef[cidx(0, k, stencil::CENTRE, i)] = -nf * dn;
            coef[cidx(ntm - 1, k, stencil::CENTRE, i)] = -sf * ds;
        }

        // Rows sum to zero, so each Gershgorin disc is centred at -|d| with
        // radius |d|: the spectrum lies in [-2 max|d|, 0].
        let mut max_diag: f64 = 0.0;
        for k in 0..n_phi {
            for j in 0..ntm {
                max_diag = max_diag.max(coef[cidx(j, k, stencil::CENTRE, i)].abs());
            }
        }
        explicit_dt[i] = EXPLICIT_DT_SAFETY * 2.0 / (2.0 * max_diag);
    }

    Ok(DiffusionOperator {
        ntm,
        npm,
        nr,
        coef,
        nu: nu.values().to_vec(),
        dp: grid.dp.clone(),
        npole_fac,
        spole_fac,
        explicit_dt,
    })
}

const POLE_SUMS: ReductionSpec<2> = ReductionSpec::new([Combiner::Sum, Combiner::Sum]);

impl DiffusionOperator {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.ntm, self.npm, self.nr)
    }

    pub fn nr(&self) -> usize {
        self.nr
    }

    #[inline]
    pub fn coef(&self, j: usize, k: usize, c: usize, i: usize) -> f64 {
        self.coef[((i * 5 + c) * self.npm + k) * self.ntm + j]
    }

    /// Contiguous coefficient column `coef(:, k, c, i)`.
    #[inline]
    fn coef_col(&self, k: usize, c: usize, i: usize) -> &[f64] {
        let start = ((i * 5 + c) * self.npm + k) * self.ntm;
        &self.coef[start..start + self.ntm]
    }

    pub fn nu(&self, j: usize, k: usize, i: usize) -> f64 {
        self.nu[(i * self.npm + k) * self.ntm + j]
    }

    /// Stable forward-Euler step per realization.
    pub fn explicit_dt(&self) -> &[f64] {
        &self.explicit_dt
    }

    fn check(&self, x: &MapField) -> Result<(), DiffusionError> {
        if x.dims() != self.dims() {
            return Err(DiffusionError::DimensionMismatch {
                expected: self.dims(),
                got: x.dims(),
            });
        }
        Ok(())
    }

    fn n_phi(&self) -> usize {
        self.npm - 1
    }

    /// Interior rows `1..ntm-1` of storage column `k` in realization `i`.
    ///
    /// This is the five-point stencil written against neighbour differences
    /// (`coef_c · (x_c - x)` summed over the four neighbours). With zero row
    /// sums it is algebraically the centre-coefficient form, and it maps
    /// constant fields to exactly zero.
    fn interior_column(&self, i: usize, k: usize, x: &[f64], y: &mut [f64]) {
        let ntm = self.ntm;
        let n_phi = self.n_phi();
        let u = k % n_phi;
        let w = (u + n_phi - 1) % n_phi;
        let e = (u + 1) % n_phi;
        let xc = &x[u * ntm..(u + 1) * ntm];
        let xw = &x[w * ntm..(w + 1) * ntm];
        let xe = &x[e * ntm..(e + 1) * ntm];
        let c_w = self.coef_col(k, stencil::WEST, i);
        let c_n = self.coef_col(k, stencil::NORTH, i);
        let c_s = self.coef_col(k, stencil::SOUTH, i);
        let c_e = self.coef_col(k, stencil::EAST, i);
        for j in 1..ntm - 1 {
            let xj = xc[j];
            y[j] = c_w[j] * (xw[j] - xj)
                + c_n[j] * (xc[j - 1] - xj)
                + c_s[j] * (xc[j + 1] - xj)
                + c_e[j] * (xe[j] - xj);
        }
    }

    /// Longitude sums of the pole fluxes for realization `i`.
    fn pole_fluxes(&self, exec: &Executor, i: usize, x: &[f64]) -> (f64, f64) {
        let ntm = self.ntm;
        let npm = self.npm;
        let nu = &self.nu[i * ntm * npm..(i + 1) * ntm * npm];
        let space = IndexSpace::zero_based(&[self.n_phi()]);
        let [f_n, f_s] = exec.par_reduce(&space, &POLE_SUMS, |idx| {
            let k = idx[0] as usize;
            let c = k * ntm;
            let dp = self.dp[k];
            [
                (nu[c] + nu[c + 1]) * (x[c + 1] - x[c]) * dp,
                (nu[c + ntm - 2] + nu[c + ntm - 1]) * (x[c + ntm - 1] - x[c + ntm - 2]) * dp,
            ]
        });
        (f_n, f_s)
    }

    /// Apply to one realization: `x` and `y` are `ntm * npm` slices.
    pub fn apply_realization(&self, exec: &Executor, i: usize, x: &[f64], y: &mut [f64]) {
        let ntm = self.ntm;
        let columns = IndexSpace::zero_based(&[self.npm]);
        exec.par_for_chunks(&columns, y, ntm, |idx, col| {
            self.interior_column(i, idx[0] as usize, x, col)
        });
        let (f_n, f_s) = self.pole_fluxes(exec, i, x);
        let north = f_n * self.npole_fac[i];
        let south = -f_s * self.spole_fac[i];
        exec.par_for_chunks(&columns, y, ntm, |_, col| {
            col[0] = north;
            col[ntm - 1] = south;
        });
    }
}

/// `y = L x` for every realization.
///
/// Interior points run as one parallel loop over `(i, k)` columns; the pole
/// rows follow as an outer loop over realizations, each reducing its two
/// pole fluxes before writing the pole rows.
pub fn apply_diffusion(
    exec: &Executor,
    op: &DiffusionOperator,
    x: &MapField,
) -> Result<MapField, DiffusionError> {
    op.check(x)?;
    let mut y = MapField::zeros(op.ntm, op.npm, op.nr);
    apply_diffusion_into(exec, op, x, &mut y)?;
    Ok(y)
}

pub fn apply_diffusion_into(
    exec: &Executor,
    op: &DiffusionOperator,
    x: &MapField,
    y: &mut MapField,
) -> Result<(), DiffusionError> {
    op.check(x)?;
    op.check(y)?;
    let (ntm, npm, nr) = op.dims();
    let points = ntm * npm;
    let xv = x.values();
    let columns = IndexSpace::zero_based(&[nr, npm]);
    exec.par_for_chunks(&columns, y.values_mut(), ntm, |idx, col| {
        let (i, k) = (idx[0] as usize, idx[1] as usize);
        op.interior_column(i, k, &xv[i * points..(i + 1) * points], col);
    });
    let realizations = IndexSpace::zero_based(&[nr]);
    let inner = IndexSpace::zero_based(&[npm]);
    exec.par_for_nested(&realizations, y.values_mut(), points, |idx, yr| {
        let i = idx[0] as usize;
        let (f_n, f_s) = op.pole_fluxes(exec, i, &xv[i * points..(i + 1) * points]);
        let north = f_n * op.npole_fac[i];
        let south = -f_s * op.spole_fac[i];
        exec.par_for_chunks(&inner, yr, ntm, |_, col| {
            col[0] = north;
            col[ntm - 1] = south;
        });
    });
    Ok(())
}

/// Stable forward-Euler step per realization: `2 · 0.95 / ρ` where `ρ` is the
/// Gershgorin bound `2 · max|coef(centre)|` on the operator's spectral radius.
pub fn explicit_dt_limit(op: &DiffusionOperator) -> Vec<f64> {
    op.explicit_dt.clone()
}
