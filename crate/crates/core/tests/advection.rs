mod common;

use common::random_field;
use fluxport::advection::{
    advect_step, build_analytic_flows, cfl_dt_limit, ssprk43_advance, AdvectionMethod, FlowField, FlowParams,
    CFL_SAFETY,
};
use fluxport::{build_uniform_grid, integrate_map, Executor, MapField, SphericalGrid};
use proptest::prelude::*;

const METHODS: [AdvectionMethod; 2] = [AdvectionMethod::Upwind, AdvectionMethod::Weno3];

fn rigid(grid: &SphericalGrid, nr: usize) -> FlowField {
    let p = FlowParams {
        d0: 14.0,
        d2: 0.0,
        d4: 0.0,
        m1: 0.0,
        m2: 0.0,
        ..FlowParams::default()
    };
    build_analytic_flows(grid, &p, nr)
}

fn extrema(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

#[test]
fn unit_courant_rigid_rotation_shifts_by_one_cell() {
    let g = build_uniform_grid(17, 32).unwrap();
    let flow = rigid(&g, 1);
    let dt = cfl_dt_limit(&g, &flow)[0] / CFL_SAFETY;
    let x = random_field(&g, 1, 3);
    let exec = Executor::serial();
    let y = advect_step(&exec, &g, &flow, &x, dt, AdvectionMethod::Upwind).unwrap();
    let n_phi = g.n_phi();
    // Positive rotation moves material towards increasing longitude.
    for k in 0..g.npm() {
        let src = (k % n_phi + n_phi - 1) % n_phi;
        for j in 1..g.ntm() - 1 {
            let (a, b) = (y.get(j, k, 0), x.get(j, src, 0));
            assert!((a - b).abs() < 1e-12, "({j}, {k}): {a} vs {b}");
        }
        assert_eq!(y.get(0, k, 0), x.get(0, k, 0));
        assert_eq!(y.get(g.ntm() - 1, k, 0), x.get(g.ntm() - 1, k, 0));
    }
}

#[test]
fn steps_conserve_flux_for_both_methods() {
    let g = build_uniform_grid(33, 64).unwrap();
    let flow = build_analytic_flows(&g, &FlowParams::default(), 2).scaled(200.0);
    let dt = cfl_dt_limit(&g, &flow).into_iter().fold(f64::INFINITY, f64::min);
    let exec = Executor::with_workers(3, true).unwrap();
    for m in METHODS {
        let mut x = random_field(&g, 2, 21);
        let scale: f64 = (0..2).map(|i| integrate_map(&exec, &g, x.realization(i)).unwrap().positive).sum();
        let before: Vec<f64> = (0..2).map(|i| integrate_map(&exec, &g, x.realization(i)).unwrap().signed).collect();
        for _ in 0..20 {
            x = ssprk43_advance(&exec, &g, &flow, &x, 2.0 * dt, m).unwrap();
        }
        for (i, b) in before.iter().enumerate() {
            let after = integrate_map(&exec, &g, x.realization(i)).unwrap().signed;
            assert!((after - b).abs() <= 1e-12 * scale, "{}: {b} -> {after}", m.name());
        }
        assert!(x.is_wrap_consistent());
    }
}

#[test]
fn upwind_rotation_is_monotone() {
    let g = build_uniform_grid(33, 64).unwrap();
    let flow = rigid(&g, 1);
    let dt = cfl_dt_limit(&g, &flow)[0];
    let exec = Executor::serial();
    let mut x = random_field(&g, 1, 8);
    let (lo, hi) = extrema(x.values());
    for _ in 0..50 {
        x = advect_step(&exec, &g, &flow, &x, dt, AdvectionMethod::Upwind).unwrap();
        let (l, h) = extrema(x.values());
        assert!(l >= lo - 1e-14 && h <= hi + 1e-14);
    }
}

#[test]
fn upwind_preserves_positivity_with_meridional_flow() {
    let g = build_uniform_grid(33, 64).unwrap();
    let flow = build_analytic_flows(&g, &FlowParams::default(), 1).scaled(500.0);
    let dt = cfl_dt_limit(&g, &flow)[0];
    let exec = Executor::serial();
    let mut x = random_field(&g, 1, 4);
    x.values_mut().iter_mut().for_each(|v| *v = v.abs());
    for _ in 0..50 {
        x = advect_step(&exec, &g, &flow, &x, dt, AdvectionMethod::Upwind).unwrap();
        assert!(x.values().iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let g = build_uniform_grid(17, 32).unwrap();
    let flow = build_analytic_flows(&g, &FlowParams::default(), 2).scaled(300.0);
    let dt = cfl_dt_limit(&g, &flow).into_iter().fold(f64::INFINITY, f64::min);
    let x = random_field(&g, 2, 1);
    for m in METHODS {
        let one = ssprk43_advance(&Executor::with_workers(1, true).unwrap(), &g, &flow, &x, dt, m).unwrap();
        let four = ssprk43_advance(&Executor::with_workers(4, true).unwrap(), &g, &flow, &x, dt, m).unwrap();
        assert_eq!(one.values(), four.values());
    }
}

#[test]
fn ssprk_rejects_steps_beyond_twice_the_limit() {
    let g = build_uniform_grid(17, 32).unwrap();
    let flow = rigid(&g, 1);
    let dt = cfl_dt_limit(&g, &flow)[0];
    let x = MapField::for_grid(&g, 1);
    let exec = Executor::serial();
    assert!(ssprk43_advance(&exec, &g, &flow, &x, 2.0 * dt, AdvectionMethod::Weno3).is_ok());
    assert!(ssprk43_advance(&exec, &g, &flow, &x, 2.01 * dt, AdvectionMethod::Weno3).is_err());
}

fn blob(g: &SphericalGrid) -> MapField {
    let mut x = MapField::from_fn(g.ntm(), g.npm(), 1, |j, k, _| {
        let (t, p) = (g.theta[j], g.phi[k]);
        let c = t.sin() * (p - 2.0).cos();
        let d = c.clamp(-1.0, 1.0).acos();
        (-(d / 0.8).powi(2)).exp()
    });
    x.refresh_wrap();
    x
}

/// Area-weighted L2 error after one full solid-body rotation at Courant 0.5.
fn rotation_error(n_theta: usize, n_phi: usize, method: AdvectionMethod) -> f64 {
    let g = build_uniform_grid(n_theta, n_phi).unwrap();
    let flow = rigid(&g, 1);
    let omega = FlowParams { d0: 14.0, ..FlowParams::default() }.omega(std::f64::consts::FRAC_PI_2);
    let period = 2.0 * std::f64::consts::PI / omega;
    let steps = 2 * n_phi;
    let dt = period / steps as f64;
    let exec = Executor::serial();
    let x0 = blob(&g);
    let mut x = x0.clone();
    for _ in 0..steps {
        x = ssprk43_advance(&exec, &g, &flow, &x, dt, method).unwrap();
    }
    let mut num = 0.0;
    for k in 0..g.n_phi() {
        for j in 0..g.ntm() {
            num += g.row_area[j] * (x.get(j, k, 0) - x0.get(j, k, 0)).powi(2);
        }
    }
    num.sqrt()
}

#[test]
fn weno_full_rotation_converges_at_second_order() {
    // Coarser pairs are still pre-asymptotic: the nonlinear weights switch
    // towards the two-point stencil near the blob's extremum.
    let coarse = rotation_error(129, 256, AdvectionMethod::Weno3);
    let fine = rotation_error(257, 512, AdvectionMethod::Weno3);
    let order = (coarse / fine).log2();
    assert!(order >= 2.0, "order {order} ({coarse:e} -> {fine:e})");
}

#[test]
fn weno_is_more_accurate_than_upwind() {
    let up = rotation_error(33, 64, AdvectionMethod::Upwind);
    let we = rotation_error(33, 64, AdvectionMethod::Weno3);
    assert!(we < up, "weno {we:e} upwind {up:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_flows_conserve_and_stay_finite(
        seed in 0u64..1000,
        scale in 1.0f64..400.0,
        frac in 0.05f64..1.0,
        weno in any::<bool>(),
    ) {
        let g = build_uniform_grid(13, 24).unwrap();
        let flow = build_analytic_flows(&g, &FlowParams::default(), 1).scaled(scale);
        let dt = frac * 2.0 * cfl_dt_limit(&g, &flow)[0];
        let method = if weno { AdvectionMethod::Weno3 } else { AdvectionMethod::Upwind };
        let exec = Executor::serial();
        let x = random_field(&g, 1, seed);
        let y = ssprk43_advance(&exec, &g, &flow, &x, dt, method).unwrap();
        prop_assert!(y.all_finite());
        prop_assert!(y.is_wrap_consistent());
        let before = integrate_map(&exec, &g, x.values()).unwrap().signed;
        let after = integrate_map(&exec, &g, y.values()).unwrap().signed;
        prop_assert!((after - before).abs() < 1e-12);
        for k in 1..g.npm() {
            prop_assert_eq!(y.get(0, k, 0), y.get(0, 0, 0));
            prop_assert_eq!(y.get(12, k, 0), y.get(12, 0, 0));
        }
    }

    #[test]
    fn constant_field_in_rigid_rotation_is_steady(c in -100.0f64..100.0, frac in 0.05f64..1.0) {
        let g = build_uniform_grid(13, 24).unwrap();
        let flow = rigid(&g, 1);
        let dt = frac * 2.0 * cfl_dt_limit(&g, &flow)[0];
        let x = MapField::from_fn(g.ntm(), g.npm(), 1, |_, _, _| c);
        for m in METHODS {
            let y = ssprk43_advance(&Executor::serial(), &g, &flow, &x, dt, m).unwrap();
            for (a, b) in y.values().iter().zip(x.values()) {
                prop_assert!((a - b).abs() <= 1e-13 * c.abs().max(1.0));
            }
        }
    }
}

