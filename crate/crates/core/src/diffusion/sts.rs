//! Super time stepping for the diffusion operator.
//!
//! The default stepper is the second-order Runge–Kutta–Legendre recurrence
//! (RKL2, Meyer, Balsara & Aslam 2014). An `s`-stage RKL2 step is stable up to
//! `(s² + s - 2) / 4` times the forward-Euler limit while costing `s` operator
//! applications.
//!
//! Stages are carried as increments `Y_j - Y_0`, so a field the operator maps
//! to zero comes back bitwise unchanged.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::field::MapField;
use crate::parloop::{Executor, IndexSpace};

use super::{DiffusionError, DiffusionOperator};

/// A multi-stage explicit integrator for `dB/dt = L B`.
pub trait SuperStepper: Sync {
    /// Stage count needed to cover `ratio = dt / explicit_dt` in one step.
    fn stage_count(&self, ratio: f64) -> usize;

    /// Advance one realization in place; returns the number of operator
    /// applications performed.
    fn advance(
        &self,
        exec: &Executor,
        op: &DiffusionOperator,
        realization: usize,
        x: &mut [f64],
        dt: f64,
        stages: usize,
    ) -> usize;
}

/// Runge–Kutta–Legendre, second order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rkl2;

impl Rkl2 {
    fn b(j: usize) -> f64 {
        if j < 2 {
            1.0 / 3.0
        } else {
            let jf = j as f64;
            (jf * jf + jf - 2.0) / (2.0 * jf * (jf + 1.0))
        }
    }

    /// Stability gain of an `s`-stage step over forward Euler.
    pub fn gain(s: usize) -> f64 {
        let sf = s as f64;
        (sf * sf + sf - 2.0) / 4.0
    }

    /// Recurrence weights `(μ_j, ν_j, μ̃_j, γ̃_j)` for stage `j ≥ 2`.
    pub fn weights(s: usize, j: usize) -> (f64, f64, f64, f64) {
        let w1 = 4.0 / ((s * s + s) as f64 - 2.0);
        let jf = j as f64;
        let mu = (2.0 * jf - 1.0) / jf * Self::b(j) / Self::b(j - 1);
        let nu = -(jf - 1.0) / jf * Self::b(j) / Self::b(j - 2);
        let mu_t = mu * w1;
        let gamma_t = -(1.0 - Self::b(j - 1)) * mu_t;
        (mu, nu, mu_t, gamma_t)
    }

    /// Amplification factor of one `s`-stage step for `dy/dt = λ y`, `z = λ dt`.
    pub fn amplification(s: usize, z: f64) -> f64 {
        if s == 1 {
            return 1.0 + z;
        }
        let w1 = 4.0 / ((s * s + s) as f64 - 2.0);
        let (mut d2, mut d1) = (0.0, Self::b(1) * w1 * z);
        for j in 2..=s {
            let (mu, nu, mu_t, gamma_t) = Self::weights(s, j);
            let d = mu * d1 + nu * d2 + mu_t * z * (1.0 + d1) + gamma_t * z;
            d2 = d1;
            d1 = d;
        }
        1.0 + d1
    }
}

impl SuperStepper for Rkl2 {
    fn stage_count(&self, ratio: f64) -> usize {
        if ratio <= 1.0 {
            return 1;
        }
        let mut s = ((-1.0 + (9.0 + 16.0 * ratio).sqrt()) / 2.0).ceil().max(2.0) as usize;
        while s > 2 && Self::gain(s - 1) >= ratio {
            s -= 1;
        }
        while Self::gain(s) < ratio {
            s += 1;
        }
        s
    }

    fn advance(
        &self,
        exec: &Executor,
        op: &DiffusionOperator,
        realization: usize,
        x: &mut [f64],
        dt: f64,
        stages: usize,
    ) -> usize {
        let n = x.len();
        let mut l0 = vec![0.0; n];
        op.apply_realization(exec, realization, x, &mut l0);
        if stages <= 1 {
            let x0 = x.to_vec();
            exec.par_fill(x, |p| x0[p] + dt * l0[p]);
            return 1;
        }

        let y0 = x.to_vec();
        let w1 = 4.0 / ((stages * stages + stages) as f64 - 2.0);
        let mu1 = Rkl2::b(1) * w1 * dt;
        let mut d_prev2 = vec![0.0; n];
        let mut d_prev = vec![0.0; n];
        exec.par_fill(&mut d_prev, |p| mu1 * l0[p]);

        let mut stage_in = vec![0.0; n];
        let mut l = vec![0.0; n];
        let mut next = vec![0.0; n];
        for j in 2..=stages {
            let (mu, nu, mu_t, gamma_t) = Rkl2::weights(stages, j);
            exec.par_fill(&mut stage_in, |p| y0[p] + d_prev[p]);
            op.apply_realization(exec, realization, &stage_in, &mut l);
            let (a, b) = (mu_t * dt, gamma_t * dt);
            exec.par_fill(&mut next, |p| mu * d_prev[p] + nu * d_prev2[p] + a * l[p] + b * l0[p]);
            std::mem::swap(&mut d_prev2, &mut d_prev);
            std::mem::swap(&mut d_prev, &mut next);
        }
        exec.par_fill(x, |p| y0[p] + d_prev[p]);
        stages
    }
}

/// What one [`sts_advance`] call did, per realization.
#[derive(Debug, Clone, PartialEq)]
pub struct StsReport {
    pub stages: Vec<usize>,
    pub applications: Vec<usize>,
}

/// Advance every realization of `x` by `dt_target` under diffusion with one
/// super-step each. The stage count is chosen per realization from its own
/// explicit limit; `dt_target` at or below that limit is a single
/// forward-Euler step.
pub fn sts_advance(
    exec: &Executor,
    op: &DiffusionOperator,
    stepper: &dyn SuperStepper,
    x: &mut MapField,
    dt_target: f64,
) -> Result<StsReport, DiffusionError> {
    if !dt_target.is_finite() || dt_target < 0.0 {
        return Err(DiffusionError::BadTimeStep(dt_target));
    }
    op.check(x)?;
    let nr = x.nr();
    if dt_target == 0.0 {
        return Ok(StsReport {
            stages: vec![0; nr],
            applications: vec![0; nr],
        });
    }
    let stages: Vec<usize> = op
        .explicit_dt()
        .iter()
        .map(|&edt| stepper.stage_count(dt_target / edt))
        .collect();
    let points = x.points();
    let realizations = IndexSpace::zero_based(&[nr]);
    let counts: Vec<AtomicUsize> = (0..nr).map(|_| AtomicUsize::new(0)).collect();
    exec.par_for_nested(&realizations, x.values_mut(), points, |idx, xr| {
        let i = idx[0] as usize;
        let used = stepper.advance(exec, op, i, xr, dt_target, stages[i]);
        counts[i].store(used, Ordering::Relaxed);
    });
    let applications = counts.iter().map(|c| c.load(Ordering::Relaxed)).collect();
    Ok(StsReport { stages, applications })
}
