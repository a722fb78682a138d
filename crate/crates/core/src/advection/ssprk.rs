//! Four-stage, third-order strong-stability-preserving Runge–Kutta.
//!
//! With `h = dt/2` and `E_h` a forward-Euler stage:
//!
//! ```text
//! u1 = E_h(u)
//! u2 = E_h(u1)
//! u3 = 2/3 u + 1/3 E_h(u2)
//! u' = E_h(u3)
//! ```
//!
//! Every stage is a convex combination of Euler steps, so the scheme is SSP
//! with coefficient 2: stable whenever `dt/2` is within the Euler limit.

use crate::field::MapField;
use crate::grid::SphericalGrid;
use crate::parloop::Executor;

use super::{advect_into, cfl_dt_limit, check_shape, AdvectionError, AdvectionMethod, FlowField, LIMIT_SLACK, SSPRK43_COEFFICIENT};

/// Drive the tableau with any Euler stage `euler(u, h)` over flat state
/// vectors.
pub fn ssprk43<E>(
    u: &[f64],
    dt: f64,
    mut euler: impl FnMut(&[f64], f64) -> Result<Vec<f64>, E>,
) -> Result<Vec<f64>, E> {
    let h = 0.5 * dt;
    let u1 = euler(u, h)?;
    let u2 = euler(&u1, h)?;
    let mut u3 = euler(&u2, h)?;
    // u + (E(u2) - u)/3 rather than 2/3 u + 1/3 E(u2): a fixed point stays
    // bitwise fixed.
    for (a, &b) in u3.iter_mut().zip(u) {
        *a = b + (*a - b) * (1.0 / 3.0);
    }
    euler(&u3, h)
}

/// Advance `x` by `dt` with SSPRK(4,3) Euler stages of [`super::advect_step`].
///
/// `dt` may be up to `2 · cfl_dt_limit` (which already carries the 0.8 safety
/// factor).
pub fn ssprk43_advance(
    exec: &Executor,
    grid: &SphericalGrid,
    flow: &FlowField,
    x: &MapField,
    dt: f64,
    method: AdvectionMethod,
) -> Result<MapField, AdvectionError> {
    check_shape(flow, x)?;
    for (i, lim) in cfl_dt_limit(grid, flow).into_iter().enumerate() {
        let limit = SSPRK43_COEFFICIENT * lim;
        if dt > limit * (1.0 + LIMIT_SLACK) {
            return Err(AdvectionError::CflViolation {
                realization: i,
                dt,
                limit,
            });
        }
    }
    let (ntm, npm, nr) = x.dims();
    let mut scratch_in = x.clone();
    let mut scratch_out = MapField::zeros(ntm, npm, nr);
    let out = ssprk43(x.values(), dt, |u, h| {
        scratch_in.values_mut().copy_from_slice(u);
        advect_into(exec, grid, flow, &scratch_in, h, method, &mut scratch_out);
        Ok::<_, AdvectionError>(scratch_out.values().to_vec())
    })?;
    Ok(MapField::from_vec(ntm, npm, nr, out).expect("shape preserved"))
}
