//! Physical units. Frequencies are given as `ω/2π` in GHz (modes, spacings)
//! or MHz (couplings, Rabi frequencies), rates in 1/μs and times in μs; the
//! core works in units of `ω_a` with `ħ = 1`.

use std::f64::consts::PI;

/// Conversion anchored on the mode-a frequency `ω_a/2π`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalScale {
    omega_a_ghz: f64,
}

impl PhysicalScale {
    pub fn new(omega_a_ghz: f64) -> Result<Self, String> {
        if !(omega_a_ghz > 0.0 && omega_a_ghz.is_finite()) {
            return Err(format!("omega_a_ghz must be positive and finite, got {omega_a_ghz}"));
        }
        Ok(PhysicalScale { omega_a_ghz })
    }

    pub fn omega_a_ghz(&self) -> f64 {
        self.omega_a_ghz
    }

    /// `ω_a` in rad/μs.
    fn omega_a_per_us(&self) -> f64 {
        2.0 * PI * 1000.0 * self.omega_a_ghz
    }

    pub fn from_ghz(&self, f: f64) -> f64 {
        f / self.omega_a_ghz
    }

    pub fn to_ghz(&self, x: f64) -> f64 {
        x * self.omega_a_ghz
    }

    pub fn from_mhz(&self, f: f64) -> f64 {
        f / (1000.0 * self.omega_a_ghz)
    }

    pub fn to_mhz(&self, x: f64) -> f64 {
        x * 1000.0 * self.omega_a_ghz
    }

    /// Rate in 1/μs to units of `ω_a`.
    pub fn from_per_us(&self, r: f64) -> f64 {
        r / self.omega_a_per_us()
    }

    pub fn to_per_us(&self, x: f64) -> f64 {
        x * self.omega_a_per_us()
    }

    /// Dimensionless time `ω_a t` to μs.
    pub fn time_to_us(&self, t: f64) -> f64 {
        t / self.omega_a_per_us()
    }

    pub fn time_from_us(&self, t: f64) -> f64 {
        t * self.omega_a_per_us()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupling_example() {
        let s = PhysicalScale::new(4.0).unwrap();
        assert!((s.from_mhz(120.0) - 0.03).abs() < 1e-15);
        assert!((s.from_ghz(6.8) - 1.7).abs() < 1e-15);
    }

    #[test]
    fn round_trips_are_identity() {
        let s = PhysicalScale::new(4.0).unwrap();
        for x in [1e-9, 3.7e-6, 0.03, 1.7, 754.0, 5562.0] {
            for (f, g) in [
                (s.from_ghz(s.to_ghz(x)), x),
                (s.from_mhz(s.to_mhz(x)), x),
                (s.from_per_us(s.to_per_us(x)), x),
                (s.time_from_us(s.time_to_us(x)), x),
            ] {
                assert!((f - g).abs() <= 1e-12 * g.abs());
            }
        }
    }

    #[test]
    fn rejects_bad_reference() {
        assert!(PhysicalScale::new(0.0).is_err());
        assert!(PhysicalScale::new(f64::NAN).is_err());
    }
}
