mod common;

use common::{dense_diffusion_matrix, make_physical, matvec, max_abs_diff, random_field};
use fluxport::diffusion::{
    apply_diffusion, build_diffusion_operator, explicit_dt_limit, sts_advance, DiffusionOperator, Rkl2,
};
use fluxport::{build_uniform_grid, integrate_map, Executor, MapField, SphericalGrid};

fn constant_nu(grid: &SphericalGrid, nr: usize, v: f64) -> MapField {
    MapField::from_fn(grid.ntm(), grid.npm(), nr, |_, _, _| v)
}

fn variable_nu(grid: &SphericalGrid, nr: usize) -> MapField {
    let n_phi = grid.n_phi();
    MapField::from_fn(grid.ntm(), grid.npm(), nr, |j, k, i| {
        let k = k % n_phi;
        (1.0 + 0.4 * (0.7 * j as f64).sin() + 0.3 * (1.3 * k as f64).cos()) * (1.0 + i as f64)
    })
}

#[test]
fn operator_matches_dense_oracle_on_basis_vectors() {
    let g = build_uniform_grid(8, 16).unwrap();
    let op = build_diffusion_operator(&g, &constant_nu(&g, 1, 1.0)).unwrap();
    let dense = dense_diffusion_matrix(8, 16, |_, _| 1.0);
    let exec = Executor::serial();
    let (ntm, npm) = (g.ntm(), g.npm());
    // Unknowns: one per pole, one per interior (j, unique k).
    let mut unknowns = vec![(0usize, 0usize), (ntm - 1, 0)];
    for k in 0..g.n_phi() {
        for j in 1..ntm - 1 {
            unknowns.push((j, k));
        }
    }
    let mut worst: f64 = 0.0;
    for &(j, k) in &unknowns {
        let mut e = MapField::for_grid(&g, 1);
        if j == 0 || j == ntm - 1 {
            for kk in 0..npm {
                e.set(j, kk, 0, 1.0);
            }
        } else {
            e.set(j, k, 0, 1.0);
        }
        e.refresh_wrap();
        let y = apply_diffusion(&exec, &op, &e).unwrap();
        let y_ref = matvec(&dense, e.values());
        worst = worst.max(max_abs_diff(y.values(), &y_ref));
    }
    assert!(worst < 1e-13, "max abs diff {worst:e}");
}

#[test]
fn apply_matches_dense_oracle_on_random_fields() {
    let g = build_uniform_grid(6, 12).unwrap();
    let nu = variable_nu(&g, 2);
    let op = build_diffusion_operator(&g, &nu).unwrap();
    let x = random_field(&g, 2, 11);
    for workers in [1, 4] {
        let exec = Executor::with_workers(workers, true).unwrap();
        let y = apply_diffusion(&exec, &op, &x).unwrap();
        for i in 0..2 {
            let dense = dense_diffusion_matrix(6, 12, |j, k| nu.get(j, k, i));
            let y_ref = matvec(&dense, x.realization(i));
            let d = max_abs_diff(y.realization(i), &y_ref);
            assert!(d < 1e-13, "realization {i}: {d:e}");
        }
    }
}

#[test]
fn parallel_apply_is_bitwise_serial() {
    let g = build_uniform_grid(8, 16).unwrap();
    let op = build_diffusion_operator(&g, &variable_nu(&g, 2)).unwrap();
    let x = random_field(&g, 2, 5);
    let y1 = apply_diffusion(&Executor::with_workers(1, true).unwrap(), &op, &x).unwrap();
    for w in [2, 4, 8] {
        let yw = apply_diffusion(&Executor::with_workers(w, true).unwrap(), &op, &x).unwrap();
        assert_eq!(y1.values(), yw.values());
    }
}

#[test]
fn pole_rows_match_serial_loops() {
    let g = build_uniform_grid(8, 16).unwrap();
    let nu = variable_nu(&g, 2);
    let op = build_diffusion_operator(&g, &nu).unwrap();
    let x = random_field(&g, 2, 9);
    let y = apply_diffusion(&Executor::with_workers(4, true).unwrap(), &op, &x).unwrap();
    let (ntm, npm) = (g.ntm(), g.npm());
    for i in 0..2 {
        let (mut f_n, mut f_s) = (0.0, 0.0);
        for k in 0..g.n_phi() {
            f_n += (nu.get(0, k, i) + nu.get(1, k, i)) * (x.get(1, k, i) - x.get(0, k, i)) * g.dp[k];
            f_s += (nu.get(ntm - 2, k, i) + nu.get(ntm - 1, k, i))
                * (x.get(ntm - 1, k, i) - x.get(ntm - 2, k, i))
                * g.dp[k];
        }
        for k in 0..npm {
            assert_eq!(y.get(0, k, i).to_bits(), (f_n * op.npole_fac[i]).to_bits());
            assert_eq!(y.get(ntm - 1, k, i).to_bits(), (-f_s * op.spole_fac[i]).to_bits());
        }
    }
}

#[test]
fn zero_field_gives_zero_pole_rows() {
    let g = build_uniform_grid(6, 12).unwrap();
    let op = build_diffusion_operator(&g, &constant_nu(&g, 3, 1.0)).unwrap();
    let y = apply_diffusion(&Executor::with_workers(2, true).unwrap(), &op, &MapField::for_grid(&g, 3)).unwrap();
    assert!(y.values().iter().all(|v| *v == 0.0));
}

fn area_dot(g: &SphericalGrid, a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..g.n_phi() {
        for j in 0..g.ntm() {
            s += g.row_area[j] * a[k * g.ntm() + j] * b[k * g.ntm() + j];
        }
    }
    s
}

#[test]
fn operator_is_conservative_and_self_adjoint() {
    let g = build_uniform_grid(8, 16).unwrap();
    let op = build_diffusion_operator(&g, &variable_nu(&g, 1)).unwrap();
    let exec = Executor::serial();
    for seed in 0..10 {
        let x = random_field(&g, 1, seed);
        let z = random_field(&g, 1, 100 + seed);
        let lx = apply_diffusion(&exec, &op, &x).unwrap();
        let lz = apply_diffusion(&exec, &op, &z).unwrap();
        let norm = x.values().iter().map(|v| v.abs()).fold(0.0, f64::max);
        let total = integrate_map(&exec, &g, lx.values()).unwrap().signed;
        assert!(total.abs() < 1e-10 * norm, "net flux {total:e}");
        let a = area_dot(&g, lx.values(), z.values());
        let b = area_dot(&g, x.values(), lz.values());
        assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()), "{a} vs {b}");
    }
}

fn y10_error(nt: usize, np: usize) -> f64 {
    let g = build_uniform_grid(nt, np).unwrap();
    let nu = 0.7;
    let op = build_diffusion_operator(&g, &constant_nu(&g, 1, nu)).unwrap();
    let x = MapField::from_fn(g.ntm(), g.npm(), 1, |j, _, _| g.theta[j].cos());
    let y = apply_diffusion(&Executor::serial(), &op, &x).unwrap();
    let err = y
        .values()
        .iter()
        .zip(x.values())
        .map(|(a, b)| (a + 2.0 * nu * b).abs())
        .fold(0.0, f64::max);
    err / (2.0 * nu)
}

#[test]
fn y10_is_an_eigenfunction_to_second_order() {
    let coarse = y10_error(32, 64);
    let fine = y10_error(64, 128);
    assert!(fine < 0.02, "relative error at 64x128: {fine}");
    let order = (coarse / fine).log2();
    assert!(order > 1.8, "observed order {order} ({coarse:e} -> {fine:e})");
}

fn forward_euler_growth(op: &DiffusionOperator, g: &SphericalGrid, dt: f64, steps: usize) -> f64 {
    let exec = Executor::serial();
    let mut x = random_field(g, 1, 77);
    let start = x.values().iter().map(|v| v.abs()).fold(0.0, f64::max);
    for _ in 0..steps {
        let lx = apply_diffusion(&exec, op, &x).unwrap();
        for (a, b) in x.values_mut().iter_mut().zip(lx.values()) {
            *a += dt * b;
        }
    }
    x.values().iter().map(|v| v.abs()).fold(0.0, f64::max) / start
}

#[test]
fn explicit_limit_is_stable_and_tight() {
    let g = build_uniform_grid(8, 16).unwrap();
    let op = build_diffusion_operator(&g, &constant_nu(&g, 1, 1.0)).unwrap();
    let dt = explicit_dt_limit(&op)[0];
    assert!(dt.is_finite() && dt > 0.0);
    let stable = forward_euler_growth(&op, &g, dt, 1000);
    assert!(stable <= 1.0 + 1e-12, "growth {stable}");
    let unstable = forward_euler_growth(&op, &g, 1.2 * dt, 1000);
    assert!(unstable > 1e3, "growth at 1.2x: {unstable}");
}

fn gaussian_spot(g: &SphericalGrid, nr: usize) -> MapField {
    let (tc, pc): (f64, f64) = (1.1, 2.0);
    let mut m = MapField::from_fn(g.ntm(), g.npm(), nr, |j, k, _| {
        let (t, p) = (g.theta[j], g.phi[k]);
        let c = t.cos() * tc.cos() + t.sin() * tc.sin() * (p - pc).cos();
        let d = c.clamp(-1.0, 1.0).acos();
        10.0 * (-(d / 0.15).powi(2)).exp() + 1.0
    });
    make_physical(&mut m);
    m
}

fn extrema(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

#[test]
fn small_sts_step_is_forward_euler() {
    let g = build_uniform_grid(16, 32).unwrap();
    let op = build_diffusion_operator(&g, &variable_nu(&g, 2)).unwrap();
    let exec = Executor::serial();
    let x = gaussian_spot(&g, 2);
    let dt = 0.9 * op.explicit_dt()[0].min(op.explicit_dt()[1]);
    let lx = apply_diffusion(&exec, &op, &x).unwrap();
    let fe: Vec<f64> = x.values().iter().zip(lx.values()).map(|(a, b)| a + dt * b).collect();
    let mut y = x.clone();
    let rep = sts_advance(&exec, &op, &Rkl2, &mut y, dt).unwrap();
    assert!(rep.stages.iter().all(|&s| s <= 2));
    assert!(max_abs_diff(y.values(), &fe) <= 1e-12);
}

#[test]
fn sts_constant_field_unchanged() {
    let g = build_uniform_grid(16, 32).unwrap();
    let op = build_diffusion_operator(&g, &variable_nu(&g, 1)).unwrap();
    let mut x = constant_nu(&g, 1, 3.3);
    let exec = Executor::serial();
    for _ in 0..3 {
        sts_advance(&exec, &op, &Rkl2, &mut x, 50.0 * op.explicit_dt()[0]).unwrap();
    }
    assert!(x.values().iter().all(|v| *v == 3.3));
}

#[test]
fn sts_large_step_is_cheap_stable_and_conservative() {
    let g = build_uniform_grid(128, 256).unwrap();
    let op = build_diffusion_operator(&g, &constant_nu(&g, 1, 1e-4)).unwrap();
    let exec = Executor::serial();
    let mut x = gaussian_spot(&g, 1);
    let before = integrate_map(&exec, &g, x.values()).unwrap().signed;
    let (lo0, hi0) = extrema(x.values());
    let dt = 100.0 * op.explicit_dt()[0];
    let rep = sts_advance(&exec, &op, &Rkl2, &mut x, dt).unwrap();
    let fe_count = (dt / op.explicit_dt()[0]).ceil() as usize;
    assert!(3 * rep.applications[0] < fe_count, "{} vs {fe_count}", rep.applications[0]);
    let after = integrate_map(&exec, &g, x.values()).unwrap().signed;
    assert!(((after - before) / before).abs() < 1e-10);
    let (lo, hi) = extrema(x.values());
    assert!(hi <= hi0 + 1e-12 && lo >= lo0 - 1e-12);
    assert!(hi < hi0, "peak should decay");
}

#[test]
fn sts_rejects_non_finite_step() {
    let g = build_uniform_grid(8, 16).unwrap();
    let op = build_diffusion_operator(&g, &constant_nu(&g, 1, 1.0)).unwrap();
    let mut x = MapField::for_grid(&g, 1);
    assert!(sts_advance(&Executor::serial(), &op, &Rkl2, &mut x, f64::NAN).is_err());
    assert!(sts_advance(&Executor::serial(), &op, &Rkl2, &mut x, f64::INFINITY).is_err());
}

#[test]
fn sts_smoothing_keeps_extrema_bounded_over_many_steps() {
    let g = build_uniform_grid(32, 64).unwrap();
    let op = build_diffusion_operator(&g, &variable_nu(&g, 1)).unwrap();
    let exec = Executor::serial();
    let mut x = gaussian_spot(&g, 1);
    let (mut lo, mut hi) = extrema(x.values());
    for n in 1..=20 {
        sts_advance(&exec, &op, &Rkl2, &mut x, 37.0 * n as f64 * op.explicit_dt()[0]).unwrap();
        let (l, h) = extrema(x.values());
        assert!(h <= hi + 1e-12 && l >= lo - 1e-12, "step {n}: [{l}, {h}] vs [{lo}, {hi}]");
        lo = l;
        hi = h;
    }
}
