use serde::{Deserialize, Serialize};

use super::{flow_k, tridiag};
use crate::error::{Error, Result};

/// `f - lambda H f = h` on a uniform grid of `[a, b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventProblem {
    pub sigma: f64,
    pub lambda: f64,
    pub domain: (f64, f64),
    /// Right-hand side on the grid; its length fixes the grid.
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolventSolution {
    pub xs: Vec<f64>,
    pub f: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

impl ResolventProblem {
    pub fn grid(&self) -> Vec<f64> {
        let n = self.h.len();
        let (a, b) = self.domain;
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }
}

/// Monotone numerical Hamiltonian (Engquist-Osher splitting of
/// `H = (p + b)^2/2 - b^2/2` with drift `b(x) = -x^3/(2 sigma^4)`) and its
/// partial derivatives in the backward and forward slopes.
///
/// At the two ends the missing one-sided slope is dropped, which amounts
/// to an outflow-free boundary: the scheme reads no data beyond the grid.
fn numerical_h(bx: f64, back: Option<f64>, fwd: Option<f64>) -> (f64, f64, f64) {
    let mut val = -0.5 * bx * bx;
    let (mut d_back, mut d_fwd) = (0.0, 0.0);
    if let Some(p) = back {
        let q = (p + bx).min(0.0);
        val += 0.5 * q * q;
        d_back = q;
    }
    if let Some(p) = fwd {
        let q = (p + bx).max(0.0);
        val += 0.5 * q * q;
        d_fwd = q;
    }
    (val, d_back, d_fwd)
}

struct Eval {
    residual: Vec<f64>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

fn evaluate(p: &ResolventProblem, xs: &[f64], f: &[f64]) -> Eval {
    let n = f.len();
    let dx = xs[1] - xs[0];
    let k = flow_k(p.sigma);
    let lam = p.lambda;
    let mut e = Eval { residual: vec![0.0; n], lower: vec![0.0; n], diag: vec![0.0; n], upper: vec![0.0; n] };
    for i in 0..n {
        let bx = -k * xs[i].powi(3);
        let back = (i > 0).then(|| (f[i] - f[i - 1]) / dx);
        let fwd = (i + 1 < n).then(|| (f[i + 1] - f[i]) / dx);
        let (hv, db, df) = numerical_h(bx, back, fwd);
        e.residual[i] = f[i] - lam * hv - p.h[i];
        // d back / d f_i = 1/dx, d fwd / d f_i = -1/dx.
        e.diag[i] = 1.0 - lam * (db - df) / dx;
        if i > 0 {
            e.lower[i] = lam * db / dx;
        }
        if i + 1 < n {
            e.upper[i] = -lam * df / dx;
        }
    }
    e
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Damped semismooth Newton from the initial guess `f0`. The Jacobian is a
/// strictly diagonally dominant M-matrix, so every linear solve is stable.
pub fn solve_resolvent(problem: &ResolventProblem, f0: &[f64], tol: f64, max_iterations: usize) -> Result<ResolventSolution> {
    if !(problem.lambda > 0.0) {
        return Err(Error::invalid("lambda must be positive"));
    }
    if problem.h.len() < 3 || f0.len() != problem.h.len() {
        return Err(Error::invalid("grid needs at least 3 points and a matching initial guess"));
    }
    if problem.h.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("h must be finite on the grid"));
    }
    let xs = problem.grid();
    let mut f = f0.to_vec();
    let mut e = evaluate(problem, &xs, &f);
    let mut res = sup(&e.residual);
    let mut iterations = 0;
    while res > tol && iterations < max_iterations {
        iterations += 1;
        let rhs: Vec<f64> = e.residual.iter().map(|r| -r).collect();
        let dir = tridiag::solve(&e.lower, &e.diag, &e.upper, &rhs)
            .ok_or(Error::NoConvergence { iterations, residual: res })?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = f.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            let te = evaluate(problem, &xs, &trial);
            let tr = sup(&te.residual);
            if tr < res || t < 1e-6 {
                f = trial;
                e = te;
                res = tr;
                break;
            }
            t *= 0.5;
        }
    }
    if res > tol {
        return Err(Error::NoConvergence { iterations, residual: res });
    }
    Ok(ResolventSolution { xs, f, residual: res, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(h: impl Fn(f64) -> f64, n: usize) -> ResolventProblem {
        let mut p = ResolventProblem { sigma: 1.0, lambda: 1.0, domain: (-2.0, 2.0), h: vec![0.0; n] };
        let xs = p.grid();
        p.h = xs.iter().map(|&x| h(x)).collect();
        p
    }

    #[test]
    fn constant_data_gives_constant_solution() {
        let p = problem(|_| 0.7, 101);
        let s = solve_resolvent(&p, &vec![0.0; 101], 1e-12, 100).unwrap();
        assert!(s.f.iter().all(|v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn initialisation_does_not_matter() {
        let p = problem(|x| (2.0 * x).sin() + 0.3 * x * x, 201);
        let lo = p.h.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = p.h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let a = solve_resolvent(&p, &vec![lo; 201], 1e-10, 200).unwrap();
        let b = solve_resolvent(&p, &vec![hi; 201], 1e-10, 200).unwrap();
        let gap = a.f.iter().zip(&b.f).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
        assert!(gap < 1e-6, "{gap}");
        assert!(a.residual < 1e-8);
    }

    #[test]
    fn comparison_on_ordered_data() {
        let p1 = problem(|x| x.cos(), 151);
        let p2 = problem(|x| x.cos() + 0.2 * (1.0 + x * x).recip(), 151);
        let f1 = solve_resolvent(&p1, &p1.h, 1e-10, 200).unwrap();
        let f2 = solve_resolvent(&p2, &p2.h, 1e-10, 200).unwrap();
        assert!(f1.f.iter().zip(&f2.f).all(|(a, b)| a <= b));
    }

    #[test]
    fn rejects_bad_input() {
        let mut p = problem(|_| 0.0, 11);
        p.lambda = 0.0;
        assert!(solve_resolvent(&p, &vec![0.0; 11], 1e-10, 10).is_err());
    }
}
