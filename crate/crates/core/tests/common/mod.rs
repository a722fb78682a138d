//! Shared helpers for the integration tests: seeded random fields and an
//! independently assembled dense diffusion matrix.
#![allow(dead_code)]

use std::f64::consts::PI;

use fluxport::{MapField, SphericalGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random field with uniform pole rows and a consistent wrap column.
pub fn random_field(grid: &SphericalGrid, nr: usize, seed: u64) -> MapField {
    let mut r = rng(seed);
    let mut m = MapField::from_fn(grid.ntm(), grid.npm(), nr, |_, _, _| r.gen_range(-1.0..1.0));
    make_physical(&mut m);
    m
}

/// Force uniform pole rows and refresh the wrap column.
pub fn make_physical(m: &mut MapField) {
    let (ntm, npm, nr) = m.dims();
    for i in 0..nr {
        let (n, s) = (m.get(0, 0, i), m.get(ntm - 1, 0, i));
        for k in 0..npm {
            m.set(0, k, i, n);
            m.set(ntm - 1, k, i, s);
        }
    }
    m.refresh_wrap();
}

/// Dense matrix of the finite-volume diffusion operator for one realization,
/// built from flux balances over each cell using only the grid dimensions.
/// Rows and columns index stored points `k * ntm + j`; wrap-column rows
/// duplicate column 0 and no row references the wrap column.
pub fn dense_diffusion_matrix(ntm: usize, n_phi: usize, nu: impl Fn(usize, usize) -> f64) -> Vec<Vec<f64>> {
    let npm = n_phi + 1;
    let n = ntm * npm;
    let dth = PI / (ntm - 1) as f64;
    let dph = 2.0 * PI / n_phi as f64;
    let at = |j: usize, u: usize| u * ntm + j;
    let mut m = vec![vec![0.0; n]; n];
    for k in 0..npm {
        let u = k % n_phi;
        for j in 0..ntm {
            let row = at(j, k);
            if j == 0 || j == ntm - 1 {
                let (pole, next) = if j == 0 { (0, 1) } else { (ntm - 1, ntm - 2) };
                let cap = 2.0 * PI * (1.0 - (dth / 2.0).cos());
                for v in 0..n_phi {
                    let nu_f = 0.5 * (nu(pole, v) + nu(next, v));
                    let g = nu_f * (dth / 2.0).sin() * dph / dth / cap;
                    m[row][at(next, v)] += g;
                    m[row][at(pole, 0)] -= g;
                }
                continue;
            }
            let th = j as f64 * dth;
            let (tn, ts) = (th - dth / 2.0, th + dth / 2.0);
            let area = (tn.cos() - ts.cos()) * dph;
            let w = (u + n_phi - 1) % n_phi;
            let e = (u + 1) % n_phi;
            let mut add = |col: usize, g: f64| {
                m[row][col] += g;
                m[row][at(j, u)] -= g;
            };
            // north and south faces: length sin(θ_face)·Δφ, gradient over Δθ
            let north_col = if j - 1 == 0 { at(0, 0) } else { at(j - 1, u) };
            let south_col = if j + 1 == ntm - 1 { at(ntm - 1, 0) } else { at(j + 1, u) };
            add(north_col, 0.5 * (nu(j - 1, u) + nu(j, u)) * tn.sin() * dph / dth / area);
            add(south_col, 0.5 * (nu(j + 1, u) + nu(j, u)) * ts.sin() * dph / dth / area);
            // east and west faces: meridional length, gradient over sinθ·Δφ
            let len = (tn.cos() - ts.cos()) / th.sin();
            add(at(j, w), 0.5 * (nu(j, w) + nu(j, u)) * len / (th.sin() * dph) / area);
            add(at(j, e), 0.5 * (nu(j, e) + nu(j, u)) * len / (th.sin() * dph) / area);
        }
    }
    m
}

pub fn matvec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
