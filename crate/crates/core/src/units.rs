//! Code units: lengths in solar radii (the unit sphere), time in hours.

use std::f64::consts::PI;

pub const SOLAR_RADIUS_M: f64 = 6.96e8;
pub const SOLAR_RADIUS_KM: f64 = 6.96e5;

/// Angular rate in degrees per day to radians per hour.
pub fn deg_per_day_to_rad_per_hour(v: f64) -> f64 {
    v * PI / 180.0 / 24.0
}

/// Surface speed in m/s to solar radii per hour.
pub fn m_per_s_to_code(v: f64) -> f64 {
    v * 3600.0 / SOLAR_RADIUS_M
}

/// Diffusivity in km²/s to solar radii² per hour.
pub fn km2_per_s_to_code(v: f64) -> f64 {
    v * 3600.0 / (SOLAR_RADIUS_KM * SOLAR_RADIUS_KM)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions() {
        assert!((deg_per_day_to_rad_per_hour(360.0 * 24.0) - 2.0 * PI).abs() < 1e-12);
        assert!((m_per_s_to_code(SOLAR_RADIUS_M / 3600.0) - 1.0).abs() < 1e-15);
        assert!((km2_per_s_to_code(300.0) - 2.2295e-6).abs() < 1e-9);
    }
}
