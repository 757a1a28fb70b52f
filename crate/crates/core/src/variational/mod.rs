//! Limiting Hamiltonian `H(x, p) = -x^3 p/(2 sigma^4) + p^2/2`, its
//! Lagrangian, the action functional, optimal paths and a grid solver for
//! the resolvent equation `f - lambda H f = h`.

mod action;
mod optimal;
mod resolvent;
mod tridiag;

use serde::Serialize;

pub use action::{action, discrete_action, discrete_action_gradient, ActionReport, InitialCost};
pub use optimal::{optimal_path, shoot, OptimalPath, OptimalPathOptions};
pub use resolvent::{solve_resolvent, ResolventProblem, ResolventSolution};

/// Drift coefficient `k = 1/(2 sigma^4)` of the zero-cost flow `x' = -k x^3`.
#[inline]
pub(crate) fn flow_k(sigma: f64) -> f64 {
    1.0 / (2.0 * sigma.powi(4))
}

pub fn h_point(sigma: f64, x: f64, p: f64) -> f64 {
    -flow_k(sigma) * x * x * x * p + 0.5 * p * p
}

pub fn lagrangian(sigma: f64, x: f64, v: f64) -> f64 {
    let q = v + flow_k(sigma) * x * x * x;
    0.5 * q * q
}

/// Maximiser `p* = v + x^3/(2 sigma^4)` of `p v - H(x, p)`.
pub fn legendre_argmax(sigma: f64, x: f64, v: f64) -> f64 {
    v + flow_k(sigma) * x * x * x
}

/// `x0 (1 + x0^2 t / sigma^4)^{-1/2}`.
pub fn zero_cost_flow(sigma: f64, x0: f64, t: f64) -> f64 {
    x0 / (1.0 + x0 * x0 * t / sigma.powi(4)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LegendreCheck {
    pub numeric_sup: f64,
    pub analytic: f64,
    pub argmax: f64,
    pub p_star: f64,
    /// The grid maximum sits on an end of the grid.
    pub at_boundary: bool,
}

/// Grid supremum of `p v - H(x, p)` over `p` in `[lo, hi]` with the given pitch.
pub fn legendre_check(sigma: f64, x: f64, v: f64, lo: f64, hi: f64, pitch: f64) -> LegendreCheck {
    let steps = ((hi - lo) / pitch).round() as usize;
    let mut best = (f64::NEG_INFINITY, lo, 0usize);
    for i in 0..=steps {
        let p = lo + i as f64 * pitch;
        let val = p * v - h_point(sigma, x, p);
        if val > best.0 {
            best = (val, p, i);
        }
    }
    LegendreCheck {
        numeric_sup: best.0,
        analytic: lagrangian(sigma, x, v),
        argmax: best.1,
        p_star: legendre_argmax(sigma, x, v),
        at_boundary: best.2 == 0 || best.2 == steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamiltonian_values() {
        assert_eq!(h_point(1.0, 0.0, 3.0), 4.5);
        assert_eq!(h_point(1.0, 1.0, 1.0), 0.0);
        assert_eq!(h_point(2.0, 1.7, 0.0), 0.0);
    }

    #[test]
    fn lagrangian_values() {
        assert_eq!(lagrangian(1.0, 1.0, 0.0), 0.125);
        assert_eq!(lagrangian(1.0, 0.0, 2.0), 2.0);
        for x in [-2.0, 0.3, 1.1] {
            assert!(lagrangian(1.3, x, -flow_k(1.3) * x * x * x).abs() < 1e-15);
        }
    }

    #[test]
    fn legendre_examples() {
        let c = legendre_check(1.0, 0.0, 1.0, -5.0, 5.0, 1e-4);
        assert!((c.numeric_sup - 0.5).abs() < 1e-8 && (c.argmax - 1.0).abs() < 1e-3);
        let c = legendre_check(1.0, 1.0, 0.0, -5.0, 5.0, 1e-4);
        assert!((c.numeric_sup - 0.125).abs() < 1e-8 && (c.argmax - 0.5).abs() < 1e-3);
        assert!(legendre_check(1.0, 3.0, 3.0, -1.0, 1.0, 1e-3).at_boundary);
    }

    #[test]
    fn zero_cost_flow_values() {
        assert_eq!(zero_cost_flow(1.0, 1.0, 3.0), 0.5);
        assert_eq!(zero_cost_flow(1.0, 2.5, 0.0), 2.5);
        assert_eq!(zero_cost_flow(1.0, 0.0, 7.0), 0.0);
        assert_eq!(zero_cost_flow(1.0, -1.0, 3.0), -0.5);
    }

    #[test]
    fn matches_limiting_operator() {
        use crate::expansion::limiting_h;
        for (x, p) in [(0.3, -1.2), (1.5, 0.7), (-2.0, 2.0)] {
            assert_eq!(limiting_h(1.4, x, p), h_point(1.4, x, p));
        }
    }
}
