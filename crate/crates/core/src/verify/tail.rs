use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::simulate::{run_ensemble, simulate_full, Path, SimSpec, Workers};
use crate::stats::{adaptive_simpson, wilson};

/// Gaussian tail of the moderate-frame energy fluctuation above `a`.
///
/// Every quantity carrying the factor `exp(-k a^2)`, `k = n / (4 sigma^4 b^2)`,
/// is also reported with that factor stripped (`*_scaled`) so that large
/// exponents neither underflow nor make the comparison vacuous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailReport {
    pub a: f64,
    pub sigma: f64,
    pub n: u64,
    pub b: f64,
    /// `k a^2`.
    pub exponent: f64,
    pub integral: f64,
    pub integral_scaled: f64,
    /// Mills-ratio bound `sigma^2 b / (a sqrt(pi n)) exp(-k a^2)`.
    pub feller: f64,
    pub feller_scaled: f64,
    /// `(1/(2 a sigma^2 sqrt(pi))) (b / sqrt(n)) exp(-k a^2)`, smaller than
    /// `feller` by the factor `2 sigma^4`.
    pub displayed: f64,
    pub displayed_scaled: f64,
    pub holds: bool,
    pub displayed_holds: bool,
}

fn k_of(sigma: f64, n: f64, b: f64) -> f64 {
    n / (4.0 * sigma.powi(4) * b * b)
}

pub fn feller_bound_scaled(a: f64, sigma: f64, n: f64, b: f64) -> f64 {
    sigma * sigma * b / (a * (std::f64::consts::PI * n).sqrt())
}

pub fn feller_bound_displayed(a: f64, sigma: f64, n: f64, b: f64) -> f64 {
    let k = k_of(sigma, n, b);
    b / (2.0 * a * sigma * sigma * (std::f64::consts::PI * n).sqrt()) * (-k * a * a).exp()
}

/// Quadrature of `int_a^inf c exp(-k y^2) dy` with `c = sqrt(n)/(2 sigma^2 b sqrt(pi))`
/// after the shift `y = a + s`, with the factor `exp(-k a^2)` pulled out.
fn scaled_integral(a: f64, sigma: f64, n: f64, b: f64) -> f64 {
    let k = k_of(sigma, n, b);
    let c = n.sqrt() / (2.0 * sigma * sigma * b * std::f64::consts::PI.sqrt());
    let g = |s: f64| c * (-k * s * (2.0 * a + s)).exp();
    // exponent reaches 60 at s_max
    let s_max = (-a + (a * a + 60.0 / k).sqrt()).max(1e-300);
    let scale = c * (1.0 / (2.0 * k * a)).min(s_max);
    // integrate on a geometric partition so the sharp decay near s = 0 is resolved
    let mut total = 0.0;
    let mut lo = 0.0;
    let mut hi = s_max * 1e-6;
    while lo < s_max {
        let top = hi.min(s_max);
        total += adaptive_simpson(&g, lo, top, 1e-15 * scale, 40);
        lo = top;
        hi *= 4.0;
    }
    total
}

pub fn tail_bound_check(a: f64, params: &ModelParams, b: f64) -> Result<TailReport> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::invalid(format!("tail level must be positive, got {a}")));
    }
    if !(b >= 1.0 && b.is_finite()) {
        return Err(Error::invalid(format!("b_n must be at least 1, got {b}")));
    }
    let sigma = params.sigma();
    let n = params.nf();
    let k = k_of(sigma, n, b);
    let exponent = k * a * a;
    let damp = (-exponent).exp();
    let integral_scaled = scaled_integral(a, sigma, n, b);
    let feller_scaled = feller_bound_scaled(a, sigma, n, b);
    let displayed_scaled = feller_scaled / (2.0 * sigma.powi(4));
    Ok(TailReport {
        a,
        sigma,
        n: params.n(),
        b,
        exponent,
        integral: integral_scaled * damp,
        integral_scaled,
        feller: feller_scaled * damp,
        feller_scaled,
        displayed: displayed_scaled * damp,
        displayed_scaled,
        holds: integral_scaled <= feller_scaled,
        displayed_holds: integral_scaled <= displayed_scaled,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEmpirical {
    pub hits: u64,
    pub replicas: u64,
    pub frequency: f64,
    pub wilson: (f64, f64),
    /// Wilson lower end does not exceed the Feller bound.
    pub consistent: bool,
}

/// Frequency of `b (T_n/n - sigma^2)(t) >= a` over an ensemble, `t = spec.horizon`.
pub fn tail_empirical(spec: &SimSpec, a: f64, b: f64, workers: &Workers) -> Result<TailEmpirical> {
    let mut s = spec.clone();
    s.record_every = 0;
    let hash = s.hash();
    let e = run_ensemble(s.seed, s.replicas, &hash, workers, |_, rng| {
        let p: Path<(f64, f64)> = simulate_full(&s, rng)?;
        Ok(b * p.last().unwrap().1 >= a)
    })?;
    let hits = e.outcomes.iter().filter(|v| **v).count() as u64;
    let replicas = e.outcomes.len() as u64;
    let w = wilson(hits, replicas, 2.576);
    let bound = tail_bound_check(a, &spec.params, b)?.feller;
    Ok(TailEmpirical {
        hits,
        replicas,
        frequency: hits as f64 / replicas.max(1) as f64,
        wilson: w,
        consistent: w.0 <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::erf::erfc;

    #[test]
    fn displayed_bound_example() {
        let v = feller_bound_displayed(1.0, 1.0, 1e4, 10.0);
        let expect = 0.1 / (2.0 * std::f64::consts::PI.sqrt()) * (-25.0f64).exp();
        assert!((v / expect - 1.0).abs() < 1e-12);
        assert!((v / 3.9e-13 - 1.0).abs() < 0.02);
    }

    #[test]
    fn integral_matches_erfc() {
        // exact value: erfc(a sqrt(k)) / 2
        for &(a, n, b, sigma) in &[(1.0, 1e4, 10.0, 1.0), (0.3, 1e3, 2.0, 1.5), (0.2, 1e6, 20.0, 0.7)] {
            let p = ModelParams::new(sigma, n as u64).unwrap();
            let r = tail_bound_check(a, &p, b).unwrap();
            let k: f64 = n / (4.0 * sigma.powi(4) * b * b);
            let exact = 0.5 * erfc(a * k.sqrt());
            assert!((r.integral / exact - 1.0).abs() < 1e-9, "{} vs {exact}", r.integral);
            assert!(r.holds);
        }
    }

    #[test]
    fn scaled_forms_survive_underflow() {
        // k a^2 ~ 1e4: only the scaled forms carry information
        let p = ModelParams::new(0.7, 1_000_000).unwrap();
        let r = tail_bound_check(2.0, &p, 20.0).unwrap();
        assert_eq!(r.integral, 0.0);
        assert!(r.integral_scaled > 0.0 && r.holds);
        // Mills ratio: 1 - 1/(2 k a^2) < integral / bound < 1
        let ratio = r.integral_scaled / r.feller_scaled;
        assert!(ratio < 1.0 && ratio > 1.0 - 1.0 / (2.0 * r.exponent), "{ratio}");
    }

    #[test]
    fn displayed_bound_fails_at_unit_sigma() {
        let p = ModelParams::new(1.0, 10_000).unwrap();
        let r = tail_bound_check(1.0, &p, 10.0).unwrap();
        assert!(!r.displayed_holds);
        assert!((r.feller_scaled / r.displayed_scaled - 2.0).abs() < 1e-12);
    }

    #[test]
    fn large_level_vanishes() {
        let p = ModelParams::new(1.0, 10_000).unwrap();
        let r = tail_bound_check(50.0, &p, 10.0).unwrap();
        assert_eq!(r.integral, 0.0);
        assert_eq!(r.feller, 0.0);
        assert!(r.holds);
    }

    #[test]
    fn bad_level() {
        let p = ModelParams::new(1.0, 100).unwrap();
        assert!(tail_bound_check(0.0, &p, 2.0).is_err());
    }
}
