//! Unit conventions.

use core::f64::consts::PI;

/// Angular rate in rad/μs per linear GHz.
pub const TWO_PI_GHZ_US: f64 = 2.0 * PI * 1000.0;

/// Linear frequency (GHz) to angular rate (rad/μs).
#[inline]
pub fn angular(f_ghz: f64) -> f64 {
    TWO_PI_GHZ_US * f_ghz
}

/// Lifetime in μs to a linear-GHz rate, `1 / (2π·1000·T)`.
#[inline]
pub fn rate_from_lifetime(t_us: f64) -> f64 {
    1.0 / (TWO_PI_GHZ_US * t_us)
}

/// Linear-GHz rate to the lifetime in μs.
#[inline]
pub fn lifetime_from_rate(rate_ghz: f64) -> f64 {
    1.0 / (TWO_PI_GHZ_US * rate_ghz)
}

pub const MHZ: f64 = 1e-3;

#[inline]
pub fn to_mhz(f_ghz: f64) -> f64 {
    f_ghz * 1e3
}

#[inline]
pub fn deg(x: f64) -> f64 {
    x * PI / 180.0
}

#[inline]
pub fn to_deg(rad: f64) -> f64 {
    rad * 180.0 / PI
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lifetime_round_trip() {
        let g = rate_from_lifetime(10.0);
        assert!((lifetime_from_rate(g) - 10.0).abs() < 1e-12);
        assert!((angular(g) * 10.0 - 1.0).abs() < 1e-12);
    }
}
