//! Model parameters, state frames and the coefficient functions of the
//! microscopic, reduced and space-time rescaled generators.
//!
//! Everything here is a pure function of its arguments. Spins are Gaussian
//! with variance `sigma^2`, so `2 phi'(z) = -z / sigma^2`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spin standard deviation and system size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    sigma: f64,
    n: u64,
}

impl ModelParams {
    pub fn new(sigma: f64, n: u64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        if n == 0 {
            return Err(Error::invalid("system size n must be at least 1"));
        }
        Ok(Self { sigma, n })
    }

    #[inline]
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    #[inline]
    pub fn sigma2(&self) -> f64 {
        self.sigma * self.sigma
    }

    #[inline]
    pub fn n(&self) -> u64 {
        self.n
    }

    #[inline]
    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    pub fn with_n(&self, n: u64) -> Result<Self> {
        Self::new(self.sigma, n)
    }
}

/// The moderate-deviation sequence `b_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingSchedule {
    /// `b_n = n^alpha` with `alpha` in `(0, 1/4)`.
    Power { alpha: f64 },
    /// Explicit values on a finite support.
    Table(BTreeMap<u64, f64>),
}

impl ScalingSchedule {
    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 0.25) {
            return Err(Error::invalid(format!("exponent alpha must lie in (0, 1/4), got {alpha}")));
        }
        Ok(Self::Power { alpha })
    }

    pub fn table(entries: impl IntoIterator<Item = (u64, f64)>) -> Result<Self> {
        let map: BTreeMap<u64, f64> = entries.into_iter().collect();
        if map.is_empty() {
            return Err(Error::invalid("scaling table is empty"));
        }
        for (&n, &b) in &map {
            if n == 0 || !(b.is_finite() && b > 0.0) {
                return Err(Error::invalid(format!("bad scaling entry n={n}, b={b}")));
            }
        }
        let schedule = Self::Table(map);
        let support: Vec<u64> = schedule.support().unwrap_or_default();
        schedule.check_admissible(&support)?;
        Ok(schedule)
    }

    /// A one-entry table, mostly useful for `b = 1` identity checks.
    pub fn single(n: u64, b: f64) -> Result<Self> {
        Self::table([(n, b)])
    }

    pub fn support(&self) -> Option<Vec<u64>> {
        match self {
            Self::Power { .. } => None,
            Self::Table(map) => Some(map.keys().copied().collect()),
        }
    }

    pub fn b(&self, n: u64) -> Result<f64> {
        match self {
            Self::Power { alpha } => Ok((n as f64).powf(*alpha)),
            Self::Table(map) => map
                .get(&n)
                .copied()
                .ok_or_else(|| Error::invalid(format!("scaling table has no entry for n={n}"))),
        }
    }

    /// Checks `b_n` increasing and `b_n^4 / n` decreasing over `ns`.
    ///
    /// Only the finite range that is actually used can be checked.
    pub fn check_admissible(&self, ns: &[u64]) -> Result<()> {
        let mut sorted: Vec<u64> = ns.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut prev: Option<(u64, f64)> = None;
        for &n in &sorted {
            let b = self.b(n)?;
            if let Some((pn, pb)) = prev {
                if b <= pb {
                    return Err(Error::invalid(format!("b_n not increasing between n={pn} and n={n}")));
                }
                if b.powi(4) / n as f64 >= pb.powi(4) / pn as f64 {
                    return Err(Error::invalid(format!(
                        "b_n^4/n not decreasing between n={pn} and n={n}"
                    )));
                }
            }
            prev = Some((n, b));
        }
        Ok(())
    }
}

/// A full spin configuration `z in R^n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpinConfiguration {
    z: Vec<f64>,
}

impl SpinConfiguration {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::invalid("spin configuration must be non-empty"));
        }
        Ok(Self { z })
    }

    pub fn spins(&self) -> &[f64] {
        &self.z
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Magnetization `S = sum z_i`.
    pub fn s(&self) -> f64 {
        self.z.iter().sum()
    }

    /// `T = sum z_i^2`.
    pub fn t(&self) -> f64 {
        self.z.iter().map(|v| v * v).sum()
    }

    /// The raw-frame statistic `(S/n, T/n - sigma^2)`.
    pub fn reduce(&self, sigma2: f64) -> ReducedState {
        let n = self.z.len() as f64;
        ReducedState::raw(self.s() / n, self.t() / n - sigma2)
    }
}

/// Which scaling a reduced pair is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    /// `(S/n, T/n - sigma^2)`.
    Raw,
    /// `(S/sqrt(n), sqrt(n)(T/n - sigma^2))`.
    Clt,
    /// `(b_n S/n, b_n (T/n - sigma^2))`.
    Moderate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    pub x: f64,
    pub y: f64,
    pub frame: Frame,
}

impl ReducedState {
    pub fn raw(x: f64, y: f64) -> Self {
        Self { x, y, frame: Frame::Raw }
    }

    pub fn moderate(x: f64, y: f64) -> Self {
        Self { x, y, frame: Frame::Moderate }
    }

    pub fn clt(x: f64, y: f64) -> Self {
        Self { x, y, frame: Frame::Clt }
    }

    pub fn expect(&self, frame: Frame) -> Result<()> {
        if self.frame != frame {
            return Err(Error::FrameMismatch { expected: frame, found: self.frame });
        }
        Ok(())
    }

    /// Convert a raw state into another frame.
    pub fn rescale(&self, params: &ModelParams, b: f64, to: Frame) -> Result<Self> {
        self.expect(Frame::Raw)?;
        let s = match to {
            Frame::Raw => 1.0,
            Frame::Clt => params.nf().sqrt(),
            Frame::Moderate => b,
        };
        Ok(Self { x: self.x * s, y: self.y * s, frame: to })
    }
}

/// Drift of spin `j` (0-based) in the Langevin system.
pub fn microscopic_drift(params: &ModelParams, z: &SpinConfiguration, j: usize) -> f64 {
    let a = z.s() / (z.t() + 1.0);
    drift_from_ratio(params.sigma2(), z.spins()[j], a)
}

/// Spin drift given the mean-field ratio `a = S / (T + 1)`.
#[inline]
pub(crate) fn drift_from_ratio(sigma2: f64, zj: f64, a: f64) -> f64 {
    0.5 * (-zj / sigma2 + a - zj * a * a)
}

/// Drift vector and diffusion matrix of a two-dimensional diffusion.
///
/// The generator reads `drift . grad + 1/2 tr(diffusion . Hess)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coefficients2 {
    pub drift: [f64; 2],
    pub diffusion: [[f64; 2]; 2],
}

impl Coefficients2 {
    pub fn determinant(&self) -> f64 {
        let a = &self.diffusion;
        a[0][0] * a[1][1] - a[0][1] * a[1][0]
    }
}

/// Coefficients of the reduced generator acting on `(S/n, T/n - sigma^2)`.
pub fn reduced_coefficients(params: &ModelParams, state: ReducedState) -> Result<Coefficients2> {
    state.expect(Frame::Raw)?;
    let (x, y) = (state.x, state.y);
    let n = params.nf();
    let s2 = params.sigma2();
    let den = n * y + n * s2 + 1.0;
    if den <= 0.0 || !den.is_finite() {
        return Err(Error::OutsideStateSpace { x, y, reason: "n y + n sigma^2 + 1 <= 0".into() });
    }
    let drift_x = 0.5 * (-n * n * x * x * x / (den * den) + n * x / den - x / s2);
    let drift_y = n * x * x / (den * den) - y / s2;
    let axy = 2.0 * x / n;
    Ok(Coefficients2 {
        drift: [drift_x, drift_y],
        diffusion: [[1.0 / n, axy], [axy, 4.0 * (y + s2) / n]],
    })
}

/// `b_n` together with the model parameters: everything needed to work in
/// the moderate frame for a fixed `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluctuationScale {
    pub params: ModelParams,
    pub b: f64,
}

/// The five coefficients of the rescaled generator `G_n`:
/// `G f = cx f_x + cy f_y + cxx f_xx + cxy f_xy + cyy f_yy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratorCoefficients {
    pub drift_x: f64,
    pub drift_y: f64,
    pub second_xx: f64,
    pub second_xy: f64,
    pub second_yy: f64,
}

impl GeneratorCoefficients {
    /// Apply to first and second derivatives `(fx, fy, fxx, fxy, fyy)`.
    #[inline]
    pub fn apply(&self, fx: f64, fy: f64, fxx: f64, fxy: f64, fyy: f64) -> f64 {
        self.drift_x * fx
            + self.drift_y * fy
            + self.second_xx * fxx
            + self.second_xy * fxy
            + self.second_yy * fyy
    }

    pub fn as_diffusion(&self) -> Coefficients2 {
        Coefficients2 {
            drift: [self.drift_x, self.drift_y],
            diffusion: [
                [2.0 * self.second_xx, self.second_xy],
                [self.second_xy, 2.0 * self.second_yy],
            ],
        }
    }
}

impl FluctuationScale {
    pub fn new(params: ModelParams, schedule: &ScalingSchedule) -> Result<Self> {
        let b = schedule.b(params.n())?;
        Self::with_b(params, b)
    }

    pub fn with_b(params: ModelParams, b: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::invalid(format!("b_n must be positive, got {b}")));
        }
        Ok(Self { params, b })
    }

    /// Lower boundary `-sigma^2 b_n` of the `y` coordinate in `E_n`.
    pub fn y_floor(&self) -> f64 {
        -self.params.sigma2() * self.b
    }

    pub fn contains(&self, y: f64) -> bool {
        y > self.y_floor()
    }

    fn check(&self, x: f64, y: f64) -> Result<()> {
        if !self.contains(y) {
            return Err(Error::OutsideStateSpace { x, y, reason: "y <= -sigma^2 b_n".into() });
        }
        Ok(())
    }

    /// `h_n(y) = (1 + y/(b sigma^2) + 1/(n sigma^2))^-1`.
    pub fn h(&self, y: f64) -> Result<f64> {
        let s2 = self.params.sigma2();
        let den = 1.0 + y / (self.b * s2) + 1.0 / (self.params.nf() * s2);
        if den <= 0.0 {
            return Err(Error::OutsideStateSpace { x: f64::NAN, y, reason: "h_n denominator <= 0".into() });
        }
        Ok(1.0 / den)
    }

    pub fn coefficients(&self, state: ReducedState) -> Result<GeneratorCoefficients> {
        state.expect(Frame::Moderate)?;
        let (x, y) = (state.x, state.y);
        self.check(x, y)?;
        let s2 = self.params.sigma2();
        let s4 = s2 * s2;
        let n = self.params.nf();
        let b = self.b;
        let h = self.h(y)?;
        let b2 = b * b;
        let b4 = b2 * b2;
        Ok(GeneratorCoefficients {
            drift_x: 0.5 * (x * b2 / s2 * (h - 1.0) - x * x * x / s4 * h * h),
            drift_y: b * x * x / (n * s4) * h * h - b2 * y / s2,
            second_xx: b4 / (2.0 * n),
            second_xy: 2.0 * b2 * b * x / n,
            second_yy: 2.0 * b4 / n * (y / b + s2),
        })
    }
}

/// Free-function form of [`FluctuationScale::coefficients`].
pub fn rescaled_coefficients(
    params: &ModelParams,
    schedule: &ScalingSchedule,
    state: ReducedState,
) -> Result<GeneratorCoefficients> {
    FluctuationScale::new(*params, schedule)?.coefficients(state)
}

/// Free-function form of [`FluctuationScale::h`].
pub fn h_fn(params: &ModelParams, schedule: &ScalingSchedule, y: f64) -> Result<f64> {
    FluctuationScale::new(*params, schedule)?.h(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(sigma: f64, n: u64) -> ModelParams {
        ModelParams::new(sigma, n).unwrap()
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ModelParams::new(0.0, 3).is_err());
        assert!(ModelParams::new(-1.0, 3).is_err());
        assert!(ModelParams::new(1.0, 0).is_err());
        assert!(ScalingSchedule::power(0.25).is_err());
        assert!(ScalingSchedule::power(0.0).is_err());
    }

    #[test]
    fn drift_at_origin_vanishes() {
        let z = SpinConfiguration::new(vec![0.0; 5]).unwrap();
        for j in 0..5 {
            assert_eq!(microscopic_drift(&p(1.3, 5), &z, j), 0.0);
        }
    }

    #[test]
    fn drift_two_spins() {
        let z = SpinConfiguration::new(vec![1.0, 1.0]).unwrap();
        let d = microscopic_drift(&p(1.0, 2), &z, 0);
        assert!((d - (-7.0 / 18.0)).abs() < 1e-15);
    }

    #[test]
    fn drift_is_odd() {
        let z = SpinConfiguration::new(vec![1.0, -2.0, 3.0]).unwrap();
        let mz = SpinConfiguration::new(vec![-1.0, 2.0, -3.0]).unwrap();
        for j in 0..3 {
            let a = microscopic_drift(&p(0.7, 3), &z, j);
            let b = microscopic_drift(&p(0.7, 3), &mz, j);
            assert_eq!(a, -b);
        }
    }

    #[test]
    fn reduced_at_origin() {
        let c = reduced_coefficients(&p(1.0, 4), ReducedState::raw(0.0, 0.0)).unwrap();
        assert_eq!(c.drift, [0.0, 0.0]);
        assert_eq!(c.diffusion, [[0.25, 0.0], [0.0, 1.0]]);
        let c = reduced_coefficients(&p(2.0, 10), ReducedState::raw(0.0, 0.0)).unwrap();
        assert_eq!(c.diffusion, [[0.1, 0.0], [0.0, 1.6]]);
    }

    #[test]
    fn reduced_determinant_on_boundary() {
        let c = reduced_coefficients(&p(1.0, 7), ReducedState::raw(1.0, 0.0)).unwrap();
        assert!(c.determinant().abs() < 1e-15);
        let c = reduced_coefficients(&p(1.0, 7), ReducedState::raw(0.5, 0.3)).unwrap();
        let expected = 4.0 / 49.0 * (0.3 + 1.0 - 0.25);
        assert!((c.determinant() - expected).abs() < 1e-14);
    }

    #[test]
    fn reduced_rejects_corrupt_state_and_frame() {
        assert!(reduced_coefficients(&p(1.0, 4), ReducedState::raw(0.0, -2.0)).is_err());
        assert!(matches!(
            reduced_coefficients(&p(1.0, 4), ReducedState::moderate(0.0, 0.0)),
            Err(Error::FrameMismatch { .. })
        ));
    }

    #[test]
    fn rescaled_at_origin() {
        let sched = ScalingSchedule::single(100, 10.0).unwrap();
        let c = rescaled_coefficients(&p(1.0, 100), &sched, ReducedState::moderate(0.0, 0.0)).unwrap();
        assert_eq!(c.drift_x, 0.0);
        assert_eq!(c.drift_y, 0.0);
        assert_eq!(c.second_xx, 1e4 / 200.0);
        assert_eq!(c.second_xy, 0.0);
        assert_eq!(c.second_yy, 2.0 * 1e4 / 100.0);
    }

    #[test]
    fn rescaled_drift_example() {
        let sched = ScalingSchedule::single(100, 10.0).unwrap();
        let c = rescaled_coefficients(&p(1.0, 100), &sched, ReducedState::moderate(1.0, 0.0)).unwrap();
        let h: f64 = 100.0 / 101.0;
        let expected = -(50.0 / 101.0) - 0.5 * h * h;
        assert!((c.drift_x - expected).abs() < 1e-13);
    }

    #[test]
    fn rescaled_rejects_outside_en() {
        let sched = ScalingSchedule::single(100, 10.0).unwrap();
        assert!(rescaled_coefficients(&p(1.0, 100), &sched, ReducedState::moderate(0.0, -10.0)).is_err());
        assert!(rescaled_coefficients(&p(1.0, 100), &sched, ReducedState::raw(0.0, 0.0)).is_err());
    }

    #[test]
    fn h_values() {
        let sched = ScalingSchedule::single(100, 10.0).unwrap();
        let h = h_fn(&p(1.0, 100), &sched, 1.0).unwrap();
        assert!((h - 100.0 / 111.0).abs() < 1e-15);
        let s = FluctuationScale::new(p(1.0, 100), &sched).unwrap();
        assert!(s.h(0.0).unwrap() > s.h(1.0).unwrap());
        // h_n(0) -> 1 at rate 1/(n sigma^2)
        for n in [10u64, 1000, 100000] {
            let s = FluctuationScale::with_b(p(1.5, n), 3.0).unwrap();
            let gap = 1.0 - s.h(0.0).unwrap();
            let rate = 1.0 / (n as f64 * 2.25);
            assert!((gap / rate - 1.0).abs() < 2.0 * rate);
        }
    }

    #[test]
    fn schedule_admissibility() {
        let s = ScalingSchedule::power(0.125).unwrap();
        s.check_admissible(&[1000, 10, 100000]).unwrap();
        assert!(ScalingSchedule::table([(10, 2.0), (100, 1.5)]).is_err());
        assert!(ScalingSchedule::table([(10, 1.0), (100, 4.0)]).is_err());
        assert!(ScalingSchedule::table([(10, 1.0), (100, 1.5)]).is_ok());
        assert!(s.b(16).unwrap() > 1.0);
    }

    #[test]
    fn cauchy_schwarz_on_reduction() {
        let z = SpinConfiguration::new(vec![0.3, -1.2, 2.2, 0.1]).unwrap();
        let r = z.reduce(1.0);
        assert!(r.y + 1.0 >= r.x * r.x);
    }
}
