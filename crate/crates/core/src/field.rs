//! Ensemble of scalar maps on the spherical grid.

use crate::grid::SphericalGrid;

/// Values `B(j, k, i)` for `ntm` theta rows, `npm` phi columns (wrap column
/// included) and `nr` realizations.
///
/// Storage is column-major like the Fortran arrays it mirrors: `j` varies
/// fastest, then `k`, then the realization `i`. A realization is therefore a
/// contiguous block of `ntm * npm` values and a `(k, i)` column a contiguous
/// run of `ntm` values.
#[derive(Debug, Clone, PartialEq)]
pub struct MapField {
    ntm: usize,
    npm: usize,
    nr: usize,
    values: Vec<f64>,
}

impl MapField {
    pub fn zeros(ntm: usize, npm: usize, nr: usize) -> Self {
        Self {
            ntm,
            npm,
            nr,
            values: vec![0.0; ntm * npm * nr],
        }
    }

    pub fn for_grid(grid: &SphericalGrid, nr: usize) -> Self {
        Self::zeros(grid.ntm(), grid.npm(), nr)
    }

    pub fn from_fn(ntm: usize, npm: usize, nr: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(ntm, npm, nr);
        for i in 0..nr {
            for k in 0..npm {
                for j in 0..ntm {
                    let n = m.idx(j, k, i);
                    m.values[n] = f(j, k, i);
                }
            }
        }
        m
    }

    /// Wrap raw values laid out `j` fastest. Returns `None` on a length mismatch.
    pub fn from_vec(ntm: usize, npm: usize, nr: usize, values: Vec<f64>) -> Option<Self> {
        (values.len() == ntm * npm * nr).then_some(Self {
            ntm,
            npm,
            nr,
            values,
        })
    }

    pub fn ntm(&self) -> usize {
        self.ntm
    }
    pub fn npm(&self) -> usize {
        self.npm
    }
    pub fn nr(&self) -> usize {
        self.nr
    }
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.ntm, self.npm, self.nr)
    }

    /// Number of values in one realization.
    pub fn points(&self) -> usize {
        self.ntm * self.npm
    }

    #[inline]
    pub fn idx(&self, j: usize, k: usize, i: usize) -> usize {
        (i * self.npm + k) * self.ntm + j
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize, i: usize) -> f64 {
        self.values[self.idx(j, k, i)]
    }

    #[inline]
    pub fn set(&mut self, j: usize, k: usize, i: usize, v: f64) {
        let n = self.idx(j, k, i);
        self.values[n] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn realization(&self, i: usize) -> &[f64] {
        let n = self.points();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn realization_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.points();
        &mut self.values[i * n..(i + 1) * n]
    }

    /// Copy column `0` into the wrap column of every realization.
    pub fn refresh_wrap(&mut self) {
        let (ntm, npm) = (self.ntm, self.npm);
        for real in self.values.chunks_mut(ntm * npm) {
            let (first, rest) = real.split_at_mut(ntm);
            rest[(npm - 2) * ntm..].copy_from_slice(first);
        }
    }

    pub fn is_wrap_consistent(&self) -> bool {
        (0..self.nr).all(|i| {
            (0..self.ntm).all(|j| self.get(j, 0, i).to_bits() == self.get(j, self.npm - 1, i).to_bits())
        })
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Same grid shape with a different realization count.
    pub fn same_shape(&self, other: &MapField) -> bool {
        self.dims() == other.dims()
    }

    /// Extract one realization as a single-realization field.
    pub fn extract(&self, i: usize) -> MapField {
        MapField {
            ntm: self.ntm,
            npm: self.npm,
            nr: 1,
            values: self.realization(i).to_vec(),
        }
    }
}
