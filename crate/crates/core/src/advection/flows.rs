use crate::field::MapField;
use crate::grid::SphericalGrid;
use crate::units::{deg_per_day_to_rad_per_hour, m_per_s_to_code};

/// Analytic surface flow profile.
///
/// Differential rotation `Ω(θ) = d0 + d2·cos²θ + d4·cos⁴θ` (deg/day, in the
/// Carrington frame) and poleward meridional speed `m1·sin 2θ + m2·sin 4θ`
/// (m/s). The colatitude velocity `vt` is the negative of that speed, since
/// increasing colatitude points south. Flows are damped where the field is
/// strong by `1 / (1 + (|B|/b0)²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    pub d0: f64,
    pub d2: f64,
    pub d4: f64,
    pub m1: f64,
    pub m2: f64,
    /// Attenuation field scale in Gauss.
    pub b0: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            d0: 0.18,
            d2: -2.36,
            d4: -1.787,
            m1: 22.0,
            m2: 11.0,
            b0: 500.0,
        }
    }
}

impl FlowParams {
    /// Angular velocity in radians per hour at colatitude `theta`.
    pub fn omega(&self, theta: f64) -> f64 {
        let c2 = theta.cos().powi(2);
        deg_per_day_to_rad_per_hour(self.d0 + self.d2 * c2 + self.d4 * c2 * c2)
    }

    /// Colatitude velocity in code units at colatitude `theta`; positive
    /// coefficients give flow towards both poles.
    pub fn meridional(&self, theta: f64) -> f64 {
        -m_per_s_to_code(self.m1 * (2.0 * theta).sin() + self.m2 * (4.0 * theta).sin())
    }
}

/// Cell-centred velocities for every realization.
///
/// `vt` is the colatitude component and `vp` the linear speed along the
/// parallel, both in solar radii per hour.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub vt: MapField,
    pub vp: MapField,
    pub attenuation_applied: Vec<bool>,
}

impl FlowField {
    pub fn nr(&self) -> usize {
        self.vt.nr()
    }

    /// Multiply every velocity by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.vt.values_mut().iter_mut().for_each(|v| *v *= factor);
        out.vp.values_mut().iter_mut().for_each(|v| *v *= factor);
        out
    }
}

/// Evaluate the analytic profiles on `grid`, replicated over `nr`
/// realizations. `vt` is zero on the pole rows.
pub fn build_analytic_flows(grid: &SphericalGrid, params: &FlowParams, nr: usize) -> FlowField {
    let ntm = grid.ntm();
    let vt_row: Vec<f64> = (0..ntm)
        .map(|j| {
            if j == 0 || j == ntm - 1 {
                0.0
            } else {
                params.meridional(grid.theta[j])
            }
        })
        .collect();
    let vp_row: Vec<f64> = (0..ntm)
        .map(|j| grid.sin_theta[j] * params.omega(grid.theta[j]))
        .collect();
    FlowField {
        vt: MapField::from_fn(ntm, grid.npm(), nr, |j, _, _| vt_row[j]),
        vp: MapField::from_fn(ntm, grid.npm(), nr, |j, _, _| vp_row[j]),
        attenuation_applied: vec![false; nr],
    }
}

#[inline]
pub fn attenuation_multiplier(b: f64, b0: f64) -> f64 {
    let r = b / b0;
    1.0 / (1.0 + r * r)
}

/// Damp the flows of the realizations selected by `enabled` according to the
/// local field strength in `field`. Other realizations are copied unchanged.
pub fn attenuate_flows(flow: &FlowField, field: &MapField, params: &FlowParams, enabled: &[bool]) -> FlowField {
    assert_eq!(flow.vt.dims(), field.dims(), "flow and field shapes differ");
    assert_eq!(enabled.len(), flow.nr(), "one attenuation flag per realization");
    let mut out = flow.clone();
    for (i, &on) in enabled.iter().enumerate() {
        if !on {
            continue;
        }
        let b = field.realization(i);
        for (n, v) in out.vt.realization_mut(i).iter_mut().enumerate() {
            *v *= attenuation_multiplier(b[n], params.b0);
        }
        for (n, v) in out.vp.realization_mut(i).iter_mut().enumerate() {
            *v *= attenuation_multiplier(b[n], params.b0);
        }
        out.attenuation_applied[i] = true;
    }
    out
}
