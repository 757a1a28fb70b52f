//! Perturbative expansion of the moderate-scale Hamiltonian `H_n`.
//!
//! Exact work (cancellation conditions, Taylor identity, rational `H_n`)
//! runs on [`Poly2`] with rational coefficients. Numeric sweeps over state
//! grids run on [`Jet2`] built from a univariate [`Profile`].

pub mod bounds;
pub mod cutoff;
pub mod profile;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::Jet2;
use crate::model::{FluctuationScale, ModelParams, ReducedState, ScalingSchedule};
use crate::poly::{int, rpow, Poly2, Rational};

pub use bounds::{
    bound_constants, build_f_eps, verify_dagger_bound, BoundConstants, CutoffMode, DaggerReport, FEps, Sign,
};
pub use cutoff::{cutoff_chi, CutoffSpec};
pub use profile::Profile;

/// Test functions are exact bivariate polynomials.
pub type TestFunction = Poly2;

/// `(Gamma_f, Lambda_f)` for a univariate `f`:
/// `Gamma_f = -x y f'/(2 sigma^2)`, `Lambda_f = x y^2 (3 f' + x f'')/(8 sigma^4)`.
pub fn perturbation_functions(f: &Poly2, sigma2: &Rational) -> (Poly2, Poly2) {
    let x = Poly2::x();
    let y = Poly2::y();
    let f1 = f.dx();
    let f2 = f1.dx();
    let two_s2 = int(2) * sigma2;
    let eight_s4 = int(8) * sigma2 * sigma2;
    let gamma = (&(&x * &y) * &f1).scale(&(-Rational::one() / two_s2));
    let inner = &f1.scale(&int(3)) + &(&x * &f2);
    let lambda = (&(&(&x * &y) * &y) * &inner).scale(&(Rational::one() / eight_s4));
    (gamma, lambda)
}

/// `F_{n,f} = f + b^-1 Gamma_f + b^-2 Lambda_f` with its ingredients.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedFunction {
    pub base: Poly2,
    pub gamma: Poly2,
    pub lambda: Poly2,
    pub n: u64,
    pub b: f64,
}

impl PerturbedFunction {
    /// The combined polynomial for a rational `b`.
    pub fn combined(&self, b: &Rational) -> Poly2 {
        let g = self.gamma.scale(&(Rational::one() / b));
        let l = self.lambda.scale(&(Rational::one() / (b * b)));
        &(&self.base + &g) + &l
    }

    pub fn eval_f64(&self, x: f64, y: f64) -> f64 {
        self.base.eval_f64(x, y) + self.gamma.eval_f64(x, y) / self.b + self.lambda.eval_f64(x, y) / (self.b * self.b)
    }
}

pub fn perturb(f: &Poly2, params: &ModelParams, schedule: &ScalingSchedule, n: u64) -> Result<PerturbedFunction> {
    if !f.is_univariate() {
        return Err(Error::invalid("perturb expects a univariate f(x)"));
    }
    let sigma2 = crate::poly::from_f64(params.sigma2());
    let (gamma, lambda) = perturbation_functions(f, &sigma2);
    Ok(PerturbedFunction { base: f.clone(), gamma, lambda, n, b: schedule.b(n)? })
}

/// Left-hand sides of the two cancellation conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct CancellationResiduals {
    pub first: Poly2,
    pub second: Poly2,
}

impl CancellationResiduals {
    pub fn is_zero(&self) -> bool {
        self.first.is_zero() && self.second.is_zero()
    }
}

/// Residuals for arbitrary candidate `(gamma, lambda)`.
pub fn cancellation_residuals(f: &Poly2, gamma: &Poly2, lambda: &Poly2, sigma2: &Rational) -> CancellationResiduals {
    let x = Poly2::x();
    let y = Poly2::y();
    let xy = &x * &y;
    let f1 = f.dx();
    let s4 = sigma2 * sigma2;
    let s6 = &s4 * sigma2;
    let minus_y_over_s2 = y.scale(&(-Rational::one() / sigma2));
    let xy_over_2s4 = xy.scale(&(Rational::one() / (int(2) * &s4)));

    let first = &(&minus_y_over_s2 * &gamma.dy()) - &(&xy_over_2s4 * &f1);
    let xy2_over_2s6 = (&xy * &y).scale(&(Rational::one() / (int(2) * s6)));
    let second = &(&(&minus_y_over_s2 * &lambda.dy()) - &(&xy_over_2s4 * &gamma.dx())) + &(&xy2_over_2s6 * &f1);
    CancellationResiduals { first, second }
}

/// Residuals with the standard perturbation functions substituted.
pub fn check_cancellation(f: &Poly2, sigma2: &Rational) -> CancellationResiduals {
    let (gamma, lambda) = perturbation_functions(f, sigma2);
    cancellation_residuals(f, &gamma, &lambda, sigma2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaylorH {
    pub value: f64,
    pub epsilon: f64,
}

/// `h_n(y)` and the remainder `eps_n(y) = b^2 [h_n - 1 + y/(b s^2) - y^2/(b^2 s^4)]`.
///
/// With `u = s + e`, `s = y/(b sigma^2)`, `e = 1/(n sigma^2)`, the bracket equals
/// `-e + 2 s e + e^2 - u^3/(1+u)`, which avoids cancellation for large `b`.
pub fn taylor_h(scale: &FluctuationScale, y: f64) -> Result<TaylorH> {
    let value = scale.h(y)?;
    let s2 = scale.params.sigma2();
    let s = y / (scale.b * s2);
    let e = 1.0 / (scale.params.nf() * s2);
    let u = s + e;
    let bracket = -e + 2.0 * s * e + e * e - u * u * u / (1.0 + u);
    Ok(TaylorH { value, epsilon: scale.b * scale.b * bracket })
}

/// Rational model parameters for exact evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactScale {
    pub sigma2: Rational,
    pub b: Rational,
    pub n: Rational,
}

impl ExactScale {
    pub fn new(sigma2: Rational, b: Rational, n: u64) -> Self {
        Self { sigma2, b, n: int(n as i64) }
    }

    pub fn h(&self, y: &Rational) -> Result<Rational> {
        let den = Rational::one() + y / (&self.b * &self.sigma2) + Rational::one() / (&self.n * &self.sigma2);
        if den <= Rational::zero() {
            return Err(Error::invalid("h_n denominator <= 0"));
        }
        Ok(Rational::one() / den)
    }

    /// `(h_n(y), eps_n(y))` in exact arithmetic, straight from the definition.
    pub fn taylor_h(&self, y: &Rational) -> Result<(Rational, Rational)> {
        let h = self.h(y)?;
        let s2 = &self.sigma2;
        let b = &self.b;
        let bracket = &h - Rational::one() + y / (b * s2) - y * y / (b * b * s2 * s2);
        Ok((h, b * b * bracket))
    }
}

/// `H_n f` at `(x, y)` in the moderate frame from a second-order jet of `f`.
pub fn hamiltonian_jet(scale: &FluctuationScale, x: f64, y: f64, f: &Jet2) -> Result<f64> {
    let c = scale.coefficients(ReducedState::moderate(x, y))?;
    let g = c.apply(f.x, f.y, f.xx, f.xy, f.yy);
    let s2 = scale.params.sigma2();
    let b = scale.b;
    Ok(g + 0.5 * f.x * f.x + 2.0 * s2 * f.y * f.y + 2.0 * x / b * f.x * f.y + 2.0 * y / b * f.y * f.y)
}

/// Second-order jet of a polynomial at a point.
pub fn poly_jet(f: &Poly2, x: f64, y: f64) -> Jet2 {
    let fx = f.dx();
    let fy = f.dy();
    Jet2 {
        v: f.eval_f64(x, y),
        x: fx.eval_f64(x, y),
        y: fy.eval_f64(x, y),
        xx: fx.dx().eval_f64(x, y),
        xy: fx.dy().eval_f64(x, y),
        yy: fy.dy().eval_f64(x, y),
    }
}

/// `H_n f(x, y)` for a polynomial test function, in `f64`.
pub fn apply_hn(f: &Poly2, scale: &FluctuationScale, x: f64, y: f64) -> Result<f64> {
    hamiltonian_jet(scale, x, y, &poly_jet(f, x, y))
}

/// `H_n f(x, y)` in exact rational arithmetic.
pub fn apply_hn_exact(f: &Poly2, scale: &ExactScale, x: &Rational, y: &Rational) -> Result<Rational> {
    let s2 = &scale.sigma2;
    let s4 = s2 * s2;
    let b = &scale.b;
    let n = &scale.n;
    if y <= &(-(s2 * b)) {
        return Err(Error::invalid("state outside E_n"));
    }
    let h = scale.h(y)?;
    let h2 = &h * &h;
    let fx = f.dx();
    let fy = f.dy();
    let (px, py) = (fx.eval(x, y), fy.eval(x, y));
    let (pxx, pxy, pyy) = (fx.dx().eval(x, y), fx.dy().eval(x, y), fy.dy().eval(x, y));
    let half = crate::poly::ratio(1, 2);
    let two = int(2);
    let b2 = b * b;
    let b3 = &b2 * b;
    let b4 = &b2 * &b2;
    let cx = &half * (x * &b2 / s2 * (&h - Rational::one()) - rpow(x, 3) / &s4 * &h2);
    let cy = b * x * x / (n * &s4) * &h2 - &b2 * y / s2;
    let cxx = &b4 / (&two * n);
    let cxy = &two * &b3 * x / n;
    let cyy = &two * &b4 / n * (y / b + s2);
    let g = cx * &px + cy * &py + cxx * pxx + cxy * pxy + cyy * pyy;
    Ok(g + &half * &px * &px + &two * s2 * &py * &py + &two * x / b * &px * &py + &two * y / b * &py * &py)
}

/// Limiting Hamiltonian `Hf(x) = -x^3 f'(x)/(2 sigma^4) + f'(x)^2 / 2` from `f'(x)`.
#[inline]
pub fn limiting_h(sigma: f64, x: f64, fprime: f64) -> f64 {
    crate::variational::h_point(sigma, x, fprime)
}

pub fn limiting_h_profile(f: &Profile, sigma: f64, x: f64) -> f64 {
    limiting_h(sigma, x, f.jet(x)[1])
}

/// Jet of `F_{n,f}(x, y) = f + b^-1 Gamma_f + b^-2 Lambda_f` for a profile `f`.
pub fn perturbed_jet(f: &Profile, sigma2: f64, b: f64, x: f64, y: f64) -> Jet2 {
    let d = f.jet(x);
    let fx = Jet2::of_x([d[0], d[1], d[2]]);
    let f1 = Jet2::of_x([d[1], d[2], d[3]]);
    let f2 = Jet2::of_x([d[2], d[3], d[4]]);
    let xj = Jet2::var_x(x);
    let yj = Jet2::var_y(y);
    let gamma = (xj * yj * f1).scale(-1.0 / (2.0 * sigma2));
    let lambda = (xj * yj * yj * (f1.scale(3.0) + xj * f2)).scale(1.0 / (8.0 * sigma2 * sigma2));
    fx + gamma.scale(1.0 / b) + lambda.scale(1.0 / (b * b))
}

/// Axis-aligned box `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Box2 {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Box2 {
    pub fn square(half: f64) -> Self {
        Self { x: (-half, half), y: (-half, half) }
    }
}

/// Result of a grid sup search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSup {
    pub value: f64,
    pub at: (f64, f64),
    pub evaluated: usize,
    pub skipped: usize,
}

/// Sup of `f` over a grid on `region` with the given pitch, refined four-fold
/// in a one-pitch neighbourhood of the maximiser. `f` returns `None` at
/// points it cannot evaluate (outside the state space); those are skipped.
///
/// Rows are reduced in index order, so the result does not depend on how
/// the rows are partitioned across threads.
pub fn grid_sup<F>(region: &Box2, pitch: f64, f: F) -> GridSup
where
    F: Fn(f64, f64) -> Option<f64> + Sync,
{
    let nx = ((region.x.1 - region.x.0) / pitch).round().max(1.0) as usize;
    let ny = ((region.y.1 - region.y.0) / pitch).round().max(1.0) as usize;
    let xs: Vec<f64> = (0..=nx).map(|i| region.x.0 + (region.x.1 - region.x.0) * i as f64 / nx as f64).collect();
    let ys: Vec<f64> = (0..=ny).map(|j| region.y.0 + (region.y.1 - region.y.0) * j as f64 / ny as f64).collect();

    let row = |j: usize| -> (Option<(f64, f64, f64)>, usize, usize) {
        let y = ys[j];
        let mut best: Option<(f64, f64, f64)> = None;
        let (mut ok, mut skip) = (0, 0);
        for &x in &xs {
            match f(x, y) {
                Some(v) => {
                    ok += 1;
                    if best.is_none_or(|(bv, _, _)| v.total_cmp(&bv).is_gt()) {
                        best = Some((v, x, y));
                    }
                }
                None => skip += 1,
            }
        }
        (best, ok, skip)
    };

    #[cfg(feature = "parallel")]
    let rows: Vec<_> = {
        use rayon::prelude::*;
        (0..ys.len()).into_par_iter().map(row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<_> = (0..ys.len()).map(row).collect();

    let mut best: Option<(f64, f64, f64)> = None;
    let (mut evaluated, mut skipped) = (0, 0);
    for (b, ok, skip) in rows {
        evaluated += ok;
        skipped += skip;
        if let Some(c) = b {
            if best.is_none_or(|(bv, _, _)| c.0.total_cmp(&bv).is_gt()) {
                best = Some(c);
            }
        }
    }
    let Some((mut value, mut bx, mut by)) = best else {
        return GridSup { value: f64::NEG_INFINITY, at: (f64::NAN, f64::NAN), evaluated, skipped };
    };
    let fine = pitch / 4.0;
    let (cx, cy) = (bx, by);
    for j in -4i32..=4 {
        for i in -4i32..=4 {
            let x = (cx + fine * i as f64).clamp(region.x.0, region.x.1);
            let y = (cy + fine * j as f64).clamp(region.y.0, region.y.1);
            if let Some(v) = f(x, y) {
                evaluated += 1;
                if v.total_cmp(&value).is_gt() {
                    value = v;
                    bx = x;
                    by = y;
                }
            }
        }
    }
    GridSup { value, at: (bx, by), evaluated, skipped }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: u64,
    pub b: f64,
    pub sup: f64,
    pub at: (f64, f64),
}

/// For each `n`: sup over `region` of `|H_n F_{n,f} - Hf|`.
pub fn expansion_convergence(
    f: &Profile,
    params: &ModelParams,
    schedule: &ScalingSchedule,
    region: &Box2,
    ns: &[u64],
    pitch: f64,
) -> Result<Vec<ConvergenceRow>> {
    let mut out = Vec::with_capacity(ns.len());
    for &n in ns {
        let scale = FluctuationScale::new(params.with_n(n)?, schedule)?;
        let sigma = params.sigma();
        let s2 = params.sigma2();
        let sup = grid_sup(region, pitch, |x, y| {
            let jet = perturbed_jet(f, s2, scale.b, x, y);
            let hn = hamiltonian_jet(&scale, x, y, &jet).ok()?;
            Some((hn - limiting_h_profile(f, sigma, x)).abs())
        });
        out.push(ConvergenceRow { n, b: scale.b, sup: sup.value.max(0.0), at: sup.at });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{ratio, to_f64};

    fn square() -> Poly2 {
        Poly2::monomial(int(1), 2, 0)
    }

    #[test]
    fn perturbation_values_for_square() {
        let (g, l) = perturbation_functions(&square(), &int(1));
        assert_eq!(to_f64(&g.eval(&int(2), &int(3))), -12.0);
        assert_eq!(to_f64(&l.eval(&int(2), &int(3))), 36.0);
    }

    #[test]
    fn constant_has_no_perturbation() {
        let params = ModelParams::new(1.0, 100).unwrap();
        let s = ScalingSchedule::power(0.125).unwrap();
        let p = perturb(&Poly2::constant(int(7)), &params, &s, 100).unwrap();
        assert!(p.gamma.is_zero() && p.lambda.is_zero());
        assert_eq!(p.combined(&int(3)), Poly2::constant(int(7)));
        assert!(perturb(&Poly2::y(), &params, &s, 100).is_err());
    }

    #[test]
    fn cancellation_for_monomials() {
        for k in [2, 6] {
            assert!(check_cancellation(&Poly2::monomial(int(1), k, 0), &ratio(9, 4)).is_zero());
        }
    }

    #[test]
    fn wrong_gamma_leaves_residual() {
        let f = square();
        let s2 = int(1);
        let (_, lambda) = perturbation_functions(&f, &s2);
        let wrong = (&(&Poly2::x() * &Poly2::y()) * &f.dx()).scale(&int(-1));
        let r = cancellation_residuals(&f, &wrong, &lambda, &s2);
        let expected = (&(&Poly2::x() * &Poly2::y()) * &f.dx()).scale(&ratio(1, 2));
        assert_eq!(r.first, expected);
    }

    #[test]
    fn taylor_h_at_origin() {
        let scale = FluctuationScale::with_b(ModelParams::new(1.0, 100).unwrap(), 10.0).unwrap();
        let t = taylor_h(&scale, 0.0).unwrap();
        assert!((t.epsilon + 100.0 / 101.0).abs() < 1e-13);
        assert!((t.value - 100.0 / 101.0).abs() < 1e-15);
    }

    #[test]
    fn taylor_remainder_vanishes_along_ladder() {
        let params = ModelParams::new(1.0, 1).unwrap();
        let sched = ScalingSchedule::power(0.125).unwrap();
        let mut prev = f64::INFINITY;
        for n in [1u64 << 10, 1 << 20, 1 << 30, 1 << 40, 1 << 50] {
            let scale = FluctuationScale::new(params.with_n(n).unwrap(), &sched).unwrap();
            let sup = (0..=200)
                .map(|i| -1.0 + i as f64 / 100.0)
                .map(|y| taylor_h(&scale, y).unwrap().epsilon.abs())
                .fold(0.0, f64::max);
            assert!(sup < prev);
            prev = sup;
        }
        assert!(prev < 0.02);
    }

    #[test]
    fn hamiltonian_of_constant_and_linear() {
        let scale = FluctuationScale::with_b(ModelParams::new(1.3, 500).unwrap(), 3.0).unwrap();
        assert_eq!(apply_hn(&Poly2::constant(int(4)), &scale, 0.7, -0.2).unwrap(), 0.0);
        assert!((apply_hn(&Poly2::x(), &scale, 0.0, 0.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn limiting_values() {
        assert_eq!(limiting_h(1.0, 1.0, 2.0), 1.0);
        assert_eq!(limiting_h(1.0, 0.0, 3.0), 4.5);
        assert_eq!(limiting_h_profile(&Profile::Polynomial(vec![5.0]), 2.0, 1.7), 0.0);
    }

    #[test]
    fn zero_profile_has_zero_expansion_error() {
        let params = ModelParams::new(1.0, 10).unwrap();
        let sched = ScalingSchedule::power(0.125).unwrap();
        let rows = expansion_convergence(&Profile::zero(), &params, &sched, &Box2::square(1.0), &[1000, 10000], 0.05)
            .unwrap();
        assert!(rows.iter().all(|r| r.sup == 0.0));
    }

    #[test]
    fn grid_sup_finds_interior_peak() {
        let s = grid_sup(&Box2::square(1.0), 0.1, |x, y| Some(-(x - 0.33).powi(2) - (y + 0.41).powi(2)));
        assert!((s.at.0 - 0.325).abs() < 0.03 && (s.at.1 + 0.4).abs() < 0.03);
        let skip = grid_sup(&Box2::square(1.0), 0.5, |_, y| if y < 0.0 { None } else { Some(y) });
        assert_eq!(skip.value, 1.0);
        assert_eq!(skip.skipped, 10);
    }
}
