//! Squeezing parameter `z = R e^{i phi}` and the dB map.

use crate::math::{atanh, cis, exp, ln, log10, tanh};
use crate::{Error, Result, C64};

/// `R = s_dB ln(10) / 20`, i.e. `s_dB = 10 log10(e^{2R})`.
pub fn db_to_r(db: f64) -> f64 {
    db * ln(10.0) / 20.0
}

pub fn r_to_db(r: f64) -> f64 {
    10.0 * log10(exp(2.0 * r))
}

/// Squeezing left after a transmission `t` on both arms:
/// `tanh R' = t^2 tanh R`.
pub fn effective_squeezing(r: f64, t: f64) -> f64 {
    atanh(t * t * tanh(r))
}

/// Initial squeezing whose effective value at transmission `t` is `r_eff`.
/// Fails when `tanh(r_eff) >= t^2`.
pub fn initial_squeezing(r_eff: f64, t: f64) -> Result<f64> {
    let x = tanh(r_eff) / (t * t);
    if !(x < 1.0) {
        return Err(Error::Unreachable(x));
    }
    Ok(atanh(x))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezeParam {
    pub r: f64,
    /// Phase, reduced to `[0, 2 pi)`.
    pub phi: f64,
}

impl SqueezeParam {
    pub fn new(r: f64, phi: f64) -> Result<Self> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::invalid("squeezing magnitude must be finite and non-negative"));
        }
        if !phi.is_finite() {
            return Err(Error::invalid("squeezing phase must be finite"));
        }
        let tau = core::f64::consts::TAU;
        let mut phi = phi % tau;
        if phi < 0.0 {
            phi += tau;
        }
        Ok(Self { r, phi })
    }

    pub fn from_db(db: f64, phi: f64) -> Result<Self> {
        if !(db >= 0.0) {
            return Err(Error::invalid("squeezing in dB must be non-negative"));
        }
        Self::new(db_to_r(db), phi)
    }

    /// Squeezing from the TMSV ratio `x = e^{i phi} tanh R`, `|x| < 1`.
    pub fn from_ratio(x: C64) -> Result<Self> {
        let mag = x.norm();
        if !(mag < 1.0) {
            return Err(Error::Unreachable(mag));
        }
        let phi = if mag == 0.0 { 0.0 } else { x.arg() };
        Self::new(atanh(mag), phi)
    }

    pub fn db(&self) -> f64 {
        r_to_db(self.r)
    }

    pub fn z(&self) -> C64 {
        cis(self.phi) * self.r
    }

    /// `e^{i phi} tanh R`, the ratio of successive TMSV amplitudes.
    pub fn ratio(&self) -> C64 {
        cis(self.phi) * tanh(self.r)
    }

    /// Same phase, magnitude reduced by transmission `t`.
    pub fn effective(&self, t: f64) -> Self {
        Self { r: effective_squeezing(self.r, t), phi: self.phi }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db_map_fixes_thresholds() {
        assert_eq!(db_to_r(0.0), 0.0);
        // 0.84078 agrees with 0.8409 to four significant figures
        assert!((tanh(db_to_r(10.63)) - 0.8409).abs() < 2e-4);
        assert!((tanh(db_to_r(6.08)) - 0.6043).abs() < 5e-4);
        assert!((r_to_db(db_to_r(7.3)) - 7.3).abs() < 1e-12);
    }

    #[test]
    fn effective_squeezing_limits() {
        assert_eq!(effective_squeezing(0.0, 0.7), 0.0);
        assert!((effective_squeezing(0.9, 1.0) - 0.9).abs() < 1e-15);
        let r12 = db_to_r(12.0);
        assert!((r12 - 1.381_551_055_796_427).abs() < 1e-12);
        let reff = effective_squeezing(r12, 0.9f64.sqrt());
        assert!((reff - atanh(0.9 * tanh(r12))).abs() < 1e-15);
        assert!((r_to_db(reff) - 9.39).abs() < 0.01);
        assert!((initial_squeezing(reff, 0.9f64.sqrt()).unwrap() - r12).abs() < 1e-12);
    }

    #[test]
    fn ratio_round_trip() {
        let s = SqueezeParam::new(0.8, -1.0).unwrap();
        assert!(s.phi >= 0.0);
        let back = SqueezeParam::from_ratio(s.ratio()).unwrap();
        assert!((back.r - 0.8).abs() < 1e-12);
        assert!((back.ratio() - s.ratio()).norm() < 1e-12);
        assert!(SqueezeParam::from_ratio(C64::new(0.0, 1.0)).is_err());
    }
}
