//! Uniform colatitude/longitude mesh on the unit sphere.
//!
//! Rows `j = 0` and `j = ntm - 1` sit exactly on the north and south poles and
//! each stands for a polar cap whose value is uniform in longitude. Column
//! `k = npm - 1` is the periodic copy of column `0` (phi = 2π aliases phi = 0).
//! All indices in this crate are zero-based.

use std::f64::consts::PI;

use thiserror::Error;

use crate::parloop::{Combiner, Executor, IndexSpace, ReductionSpec};

pub const MIN_THETA_POINTS: usize = 5;
pub const MIN_PHI_POINTS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("need at least {MIN_THETA_POINTS} theta points (got {0})")]
    TooFewTheta(usize),
    #[error("need at least {MIN_PHI_POINTS} phi points (got {0})")]
    TooFewPhi(usize),
    #[error("field has {got} values, grid expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone)]
pub struct SphericalGrid {
    ntm: usize,
    npm: usize,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    /// Theta spacing per row.
    pub dtheta: Vec<f64>,
    /// Phi cell width per column.
    pub dp: Vec<f64>,
    pub sin_theta: Vec<f64>,
    /// `sin` of the face between row `j` and `j + 1` (length `ntm - 1`).
    pub sin_theta_face: Vec<f64>,
    /// Area of one cell in row `j` (identical across unique columns).
    pub row_area: Vec<f64>,
    pub inv_row_area: Vec<f64>,
    /// `(cos θ_{j-1/2} - cos θ_{j+1/2}) / sin θ_j`: the meridional face length
    /// that makes a zonal flux exact for rigid rotation. Zero at the poles.
    pub phi_face_metric: Vec<f64>,
}

/// Build a uniform mesh with `n_theta` rows (poles included) and `n_phi`
/// unique longitudes plus one wrap column.
///
/// Theta spacing is `π / (n_theta - 1)`, so `(5, 8)` gives rows at
/// `0, π/4, π/2, 3π/4, π`.
pub fn build_uniform_grid(n_theta: usize, n_phi: usize) -> Result<SphericalGrid, GridError> {
    if n_theta < MIN_THETA_POINTS {
        return Err(GridError::TooFewTheta(n_theta));
    }
    if n_phi < MIN_PHI_POINTS {
        return Err(GridError::TooFewPhi(n_phi));
    }
    let ntm = n_theta;
    let npm = n_phi + 1;
    let dth = PI / (ntm - 1) as f64;
    let dph = 2.0 * PI / n_phi as f64;

    let mut theta: Vec<f64> = (0..ntm).map(|j| j as f64 * dth).collect();
    theta[ntm - 1] = PI;
    let phi: Vec<f64> = (0..npm)
        .map(|k| if k == n_phi { 2.0 * PI } else { k as f64 * dph })
        .collect();

    let mut sin_theta: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
    sin_theta[0] = 0.0;
    sin_theta[ntm - 1] = 0.0;

    let face_theta: Vec<f64> = (0..ntm - 1).map(|j| (j as f64 + 0.5) * dth).collect();
    let sin_theta_face: Vec<f64> = face_theta.iter().map(|t| t.sin()).collect();
    // cos at the row boundaries, including the poles themselves.
    let mut cos_bound = Vec::with_capacity(ntm + 1);
    cos_bound.push(1.0);
    cos_bound.extend(face_theta.iter().map(|t| t.cos()));
    cos_bound.push(-1.0);

    let row_area: Vec<f64> = (0..ntm)
        .map(|j| (cos_bound[j] - cos_bound[j + 1]) * dph)
        .collect();
    let inv_row_area = row_area.iter().map(|a| 1.0 / a).collect();
    let phi_face_metric = (0..ntm)
        .map(|j| {
            if j == 0 || j == ntm - 1 {
                0.0
            } else {
                (cos_bound[j] - cos_bound[j + 1]) / sin_theta[j]
            }
        })
        .collect();

    Ok(SphericalGrid {
        ntm,
        npm,
        theta,
        phi,
        dtheta: vec![dth; ntm],
        dp: vec![dph; npm],
        sin_theta,
        sin_theta_face,
        row_area,
        inv_row_area,
        phi_face_metric,
    })
}

impl SphericalGrid {
    /// Theta points, pole rows included.
    pub fn ntm(&self) -> usize {
        self.ntm
    }

    /// Phi points, wrap column included.
    pub fn npm(&self) -> usize {
        self.npm
    }

    /// Unique longitudes.
    pub fn n_phi(&self) -> usize {
        self.npm - 1
    }

    /// Values per realization (`ntm * npm`).
    pub fn points(&self) -> usize {
        self.ntm * self.npm
    }

    /// Cell area in steradians; the wrap column has zero area so that summing
    /// over every stored point counts each physical cell once.
    pub fn cell_area(&self, j: usize, k: usize) -> f64 {
        if k == self.npm - 1 {
            0.0
        } else {
            self.row_area[j]
        }
    }

    /// Total area of the northern polar cap.
    pub fn north_cap_area(&self) -> f64 {
        self.row_area[0] * self.n_phi() as f64
    }

    pub fn south_cap_area(&self) -> f64 {
        self.row_area[self.ntm - 1] * self.n_phi() as f64
    }

    /// Storage column of the unique longitude `k + offset` (periodic).
    #[inline]
    pub fn wrap_col(&self, k: usize, offset: isize) -> usize {
        let n = self.n_phi() as isize;
        ((k as isize % n + offset).rem_euclid(n)) as usize
    }
}

/// Area integral of one realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapIntegral {
    pub signed: f64,
    pub positive: f64,
    pub negative: f64,
}

const FLUX_SUMS: ReductionSpec<2> = ReductionSpec::new([Combiner::Sum, Combiner::Sum]);

/// Integrate one realization (`ntm * npm` values, `j` fastest) over the
/// sphere, counting the wrap column once. `signed` is defined as
/// `positive + negative`.
pub fn integrate_map(
    exec: &Executor,
    grid: &SphericalGrid,
    values: &[f64],
) -> Result<MapIntegral, GridError> {
    if values.len() != grid.points() {
        return Err(GridError::DimensionMismatch {
            expected: grid.points(),
            got: values.len(),
        });
    }
    let ntm = grid.ntm();
    let space = IndexSpace::zero_based(&[grid.n_phi(), ntm]);
    let [positive, negative] = exec.par_reduce(&space, &FLUX_SUMS, |idx| {
        let (k, j) = (idx[0] as usize, idx[1] as usize);
        let v = values[k * ntm + j] * grid.row_area[j];
        if v >= 0.0 {
            [v, 0.0]
        } else {
            [0.0, v]
        }
    });
    Ok(MapIntegral {
        signed: positive + negative,
        positive,
        negative,
    })
}
