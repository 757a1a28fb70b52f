use serde::Serialize;

use super::action::{discrete_action, discrete_action_gradient};
use super::{flow_k, tridiag};
use crate::error::{Error, Result};
use crate::simulate::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalPathOptions {
    pub max_iterations: usize,
    /// Stop when the interior gradient sup-norm drops below this.
    pub gradient_tol: f64,
    /// RK4 steps for the shooting cross-check.
    pub shooting_steps: usize,
    /// Relative agreement demanded between the two solvers.
    pub agreement: f64,
}

impl Default for OptimalPathOptions {
    fn default() -> Self {
        Self { max_iterations: 200, gradient_tol: 1e-11, shooting_steps: 1 << 14, agreement: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalPath {
    pub path: Path,
    pub action: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub shooting_action: f64,
    /// Initial momentum `p(0)` found by shooting.
    pub shooting_p0: f64,
    pub relative_gap: f64,
}

/// Newton step for the discrete action on interior nodes. The Hessian is
/// tridiagonal; when it is not positive definite the Gauss-Newton part
/// (always positive semidefinite, positive definite on the interior) is
/// used instead.
fn newton_direction(sigma: f64, times: &[f64], vals: &[f64], grad: &[f64]) -> Vec<f64> {
    let k = flow_k(sigma);
    let n = vals.len();
    let m = n - 2;
    let build = |full: bool| {
        let mut a = vec![0.0; m];
        let mut b = vec![0.0; m];
        let mut c = vec![0.0; m];
        for i in 0..n - 1 {
            let h = times[i + 1] - times[i];
            let mid = 0.5 * (vals[i] + vals[i + 1]);
            let q = (vals[i + 1] - vals[i]) / h + k * mid * mid * mid;
            let dm = 1.5 * k * mid * mid;
            let gl = dm - 1.0 / h;
            let gr = dm + 1.0 / h;
            let curv = if full { q * 1.5 * k * mid } else { 0.0 };
            let (hll, hlr, hrr) = (h * (gl * gl + curv), h * (gl * gr + curv), h * (gr * gr + curv));
            // Node i is interior index i-1, node i+1 is interior index i.
            if i >= 1 {
                b[i - 1] += hll;
            }
            if i + 1 <= m {
                b[i] += hrr;
            }
            if i >= 1 && i + 1 <= m {
                c[i - 1] += hlr;
                a[i] += hlr;
            }
        }
        (a, b, c)
    };
    let rhs: Vec<f64> = grad[1..n - 1].iter().map(|g| -g).collect();
    let (a, b, c) = build(true);
    if let Some(d) = tridiag::solve(&a, &b, &c, &rhs) {
        return d;
    }
    let (a, b, c) = build(false);
    tridiag::solve(&a, &b, &c, &rhs).unwrap_or_else(|| rhs.clone())
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Integrates `x' = -k x^3 + p`, `p' = 3 k x^2 p` and the running cost
/// `p^2/2` with RK4. Returns `(x(T), action)`.
pub fn shoot(sigma: f64, x0: f64, p0: f64, horizon: f64, steps: usize) -> (f64, f64) {
    let k = flow_k(sigma);
    let f = |s: [f64; 3]| [-k * s[0].powi(3) + s[1], 3.0 * k * s[0] * s[0] * s[1], 0.5 * s[1] * s[1]];
    let h = horizon / steps as f64;
    let mut s = [x0, p0, 0.0];
    for _ in 0..steps {
        let k1 = f(s);
        let k2 = f([s[0] + 0.5 * h * k1[0], s[1] + 0.5 * h * k1[1], 0.0]);
        let k3 = f([s[0] + 0.5 * h * k2[0], s[1] + 0.5 * h * k2[1], 0.0]);
        let k4 = f([s[0] + h * k3[0], s[1] + h * k3[1], 0.0]);
        for j in 0..3 {
            s[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    (s[0], s[2])
}

/// Secant iteration on `p(0)` for the endpoint condition.
fn shoot_to(sigma: f64, x0: f64, x_end: f64, horizon: f64, steps: usize, guess: f64) -> Result<(f64, f64)> {
    let miss = |p: f64| shoot(sigma, x0, p, horizon, steps).0 - x_end;
    let (mut p0, mut p1) = (guess, guess + 1e-3 * (1.0 + guess.abs()));
    let (mut f0, mut f1) = (miss(p0), miss(p1));
    for _ in 0..100 {
        if f1.abs() < 1e-13 {
            break;
        }
        let denom = f1 - f0;
        if denom == 0.0 {
            break;
        }
        let p2 = p1 - f1 * (p1 - p0) / denom;
        p0 = p1;
        f0 = f1;
        p1 = p2;
        f1 = miss(p1);
    }
    if !(f1.abs() < 1e-9) {
        return Err(Error::NoConvergence { iterations: 100, residual: f1.abs() });
    }
    Ok((p1, shoot(sigma, x0, p1, horizon, steps).1))
}

/// Minimises the discrete action between fixed endpoints, then checks the
/// result against shooting on the Euler-Lagrange system.
pub fn optimal_path(sigma: f64, x0: f64, x_end: f64, horizon: f64, nodes: usize, opts: &OptimalPathOptions) -> Result<OptimalPath> {
    if !(horizon > 0.0) {
        return Err(Error::invalid("horizon must be positive"));
    }
    if nodes < 16 {
        return Err(Error::invalid("need at least 16 grid nodes"));
    }
    let times: Vec<f64> = (0..nodes).map(|i| horizon * i as f64 / (nodes - 1) as f64).collect();
    let mut vals: Vec<f64> = times.iter().map(|t| x0 + (x_end - x0) * t / horizon).collect();
    let mut value = discrete_action(sigma, &times, &vals);
    let mut grad = discrete_action_gradient(sigma, &times, &vals);
    let mut gnorm = sup(&grad[1..nodes - 1]);
    let mut iterations = 0;
    while gnorm > opts.gradient_tol && iterations < opts.max_iterations {
        iterations += 1;
        let dir = newton_direction(sigma, &times, &vals, &grad);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let mut trial = vals.clone();
            for (j, d) in dir.iter().enumerate() {
                trial[j + 1] += t * d;
            }
            let tv = discrete_action(sigma, &times, &trial);
            if tv <= value {
                vals = trial;
                value = tv;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        grad = discrete_action_gradient(sigma, &times, &vals);
        gnorm = sup(&grad[1..nodes - 1]);
        if !accepted {
            break;
        }
    }
    if gnorm > opts.gradient_tol.max(1e-8) {
        return Err(Error::NoConvergence { iterations, residual: gnorm });
    }

    // Momentum p = v + k x^3 on the first interval seeds the shooting.
    let k = flow_k(sigma);
    let h0 = times[1] - times[0];
    let m0 = 0.5 * (vals[0] + vals[1]);
    let guess = (vals[1] - vals[0]) / h0 + k * m0 * m0 * m0;
    let (p0, shooting_action) = shoot_to(sigma, x0, x_end, horizon, opts.shooting_steps, guess)?;
    let scale = shooting_action.abs().max(value.abs()).max(1e-3);
    let relative_gap = (value - shooting_action).abs() / scale;
    if relative_gap > opts.agreement {
        return Err(Error::SolverDisagreement(format!(
            "collocation action {value} vs shooting {shooting_action} (relative gap {relative_gap:e})"
        )));
    }
    Ok(OptimalPath {
        path: Path::new(times, vals)?,
        action: value,
        iterations,
        gradient_norm: gnorm,
        shooting_action,
        shooting_p0: p0,
        relative_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};

    #[test]
    fn uphill_path_costs_and_solvers_agree() {
        let r = optimal_path(1.0, 0.0, 1.0, 1.0, 1 << 12, &OptimalPathOptions::default()).unwrap();
        assert!(r.action > 0.3, "{}", r.action);
        assert!(r.relative_gap < 1e-5);
        let m = optimal_path(1.0, 0.0, -1.0, 1.0, 1 << 12, &OptimalPathOptions::default()).unwrap();
        assert!((r.action - m.action).abs() < 1e-8);
    }

    #[test]
    fn zero_cost_endpoints() {
        let r = optimal_path(1.0, 1.0, 0.5, 3.0, 1 << 12, &OptimalPathOptions::default()).unwrap();
        assert!(r.action < 1e-6, "{}", r.action);
    }

    #[test]
    fn solution_is_local_minimum() {
        let r = optimal_path(1.0, 0.0, 1.0, 1.0, 256, &OptimalPathOptions::default()).unwrap();
        let (times, vals) = r.path.clone().into_parts();
        let base = discrete_action(1.0, &times, &vals);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let mut p = vals.clone();
            for v in p.iter_mut().take(vals.len() - 1).skip(1) {
                *v += 1e-2 * (2.0 * rng.random::<f64>() - 1.0);
            }
            assert!(discrete_action(1.0, &times, &p) >= base);
        }
    }

    #[test]
    fn rejects_small_grids() {
        assert!(optimal_path(1.0, 0.0, 1.0, 1.0, 8, &OptimalPathOptions::default()).is_err());
        assert!(optimal_path(1.0, 0.0, 1.0, 0.0, 64, &OptimalPathOptions::default()).is_err());
    }
}
