//! The smooth increasing cut-off `chi_n`.
//!
//! `chi_n` is the identity on `[-R+2, R-2]`, equals `R-1` for `z >= R` and
//! `-R+1` for `z <= -R`, with `R = sigma^2 log b_n^{1/2}`. On each band of
//! width two the interpolant is the quintic Hermite polynomial matching value,
//! slope and curvature at both ends (its leading coefficient happens to
//! vanish), which is monotone with `0 <= chi' <= 1` and `|chi''| <= 3/4`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::FluctuationScale;

/// `sup |chi'|` for this construction.
pub const CHI_D1_SUP: f64 = 1.0;
/// `sup |chi''|` for this construction.
pub const CHI_D2_SUP: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutoffSpec {
    pub radius: f64,
}

impl CutoffSpec {
    /// Fails when `R < 2`: the two transition bands would overlap.
    pub fn new(scale: &FluctuationScale) -> Result<Self> {
        Self::from_radius(Self::radius_for(scale))
    }

    pub fn radius_for(scale: &FluctuationScale) -> f64 {
        scale.params.sigma2() * 0.5 * scale.b.ln()
    }

    pub fn from_radius(radius: f64) -> Result<Self> {
        if !(radius >= 2.0) {
            return Err(Error::invalid(format!(
                "cut-off radius {radius} < 2: identity band is empty"
            )));
        }
        Ok(Self { radius })
    }

    /// `[chi, chi', chi'']` at `z`.
    pub fn chi(&self, z: f64) -> [f64; 3] {
        if z < 0.0 {
            let [v, d1, d2] = self.chi_pos(-z);
            return [-v, d1, -d2];
        }
        self.chi_pos(z)
    }

    fn chi_pos(&self, z: f64) -> [f64; 3] {
        let r = self.radius;
        if z <= r - 2.0 {
            [z, 1.0, 0.0]
        } else if z >= r {
            [r - 1.0, 0.0, 0.0]
        } else {
            let t = 0.5 * (z - (r - 2.0));
            let u = 1.0 - t;
            let v = r - 2.0 + 2.0 * t - 2.0 * t * t * t + t * t * t * t;
            [v, u * u * (1.0 + 2.0 * t), -3.0 * t * u]
        }
    }

    /// Whether `z` sits in a region where `chi` is constant.
    pub fn on_plateau(&self, z: f64) -> bool {
        z.abs() >= self.radius
    }
}

/// Free-function form: `[chi, chi', chi'']`.
pub fn cutoff_chi(spec: &CutoffSpec, z: f64) -> [f64; 3] {
    spec.chi(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    fn spec4() -> CutoffSpec {
        let scale = FluctuationScale::with_b(ModelParams::new(1.0, 10).unwrap(), 8f64.exp()).unwrap();
        CutoffSpec::new(&scale).unwrap()
    }

    #[test]
    fn radius_from_schedule() {
        assert!((spec4().radius - 4.0).abs() < 1e-12);
        let small = FluctuationScale::with_b(ModelParams::new(1.0, 10).unwrap(), 10.0).unwrap();
        assert!(CutoffSpec::new(&small).is_err());
    }

    #[test]
    fn displayed_cases() {
        let c = spec4();
        assert_eq!(c.chi(1.0)[0], 1.0);
        assert_eq!(c.chi(4.0)[0], 3.0);
        assert_eq!(c.chi(17.0)[0], 3.0);
        assert_eq!(c.chi(-4.0)[0], -3.0);
        assert_eq!(c.chi(-4.0)[0], -c.chi(4.0)[0]);
        assert_eq!(c.chi(-2.0), [-2.0, 1.0, 0.0]);
    }

    #[test]
    fn monotone_c2_with_bounded_derivatives() {
        let c = spec4();
        let mut prev = c.chi(-6.0);
        let steps = 24_000;
        for i in 1..=steps {
            let z = -6.0 + 12.0 * i as f64 / steps as f64;
            let cur = c.chi(z);
            assert!(cur[0] >= prev[0] - 1e-15);
            assert!(cur[1] >= 0.0 && cur[1] <= CHI_D1_SUP + 1e-15);
            assert!(cur[2].abs() <= CHI_D2_SUP + 1e-15);
            // continuity of chi' and chi''
            assert!((cur[1] - prev[1]).abs() < 1e-2);
            assert!((cur[2] - prev[2]).abs() < 1e-2);
            prev = cur;
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let c = spec4();
        let h = 1e-6;
        for z in [-3.5, -2.5, 2.1, 2.9, 3.7] {
            let d = c.chi(z);
            let fd1 = (c.chi(z + h)[0] - c.chi(z - h)[0]) / (2.0 * h);
            let fd2 = (c.chi(z + h)[1] - c.chi(z - h)[1]) / (2.0 * h);
            assert!((fd1 - d[1]).abs() < 1e-7);
            assert!((fd2 - d[2]).abs() < 1e-7);
        }
    }
}
