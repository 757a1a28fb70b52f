use serde::Serialize;

use super::{flow_k, lagrangian};
use crate::error::{Error, Result};
use crate::simulate::Path;

/// Cost `I_0` of the starting point.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialCost {
    /// 0 at `x0`, infinite elsewhere.
    Deterministic { x0: f64 },
    /// No charge for the start.
    Free,
    /// Piecewise-linear `I_0` on the given nodes.
    Tabulated { xs: Vec<f64>, values: Vec<f64> },
}

impl InitialCost {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InitialCost::Deterministic { x0 } => {
                if (x - x0).abs() <= 1e-12 * (1.0 + x0.abs()) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            InitialCost::Free => 0.0,
            InitialCost::Tabulated { xs, values } => {
                if xs.is_empty() || x < xs[0] || x > xs[xs.len() - 1] {
                    return f64::INFINITY;
                }
                let i = xs.partition_point(|&s| s <= x).clamp(1, xs.len() - 1);
                let w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
                values[i - 1] + w * (values[i] - values[i - 1])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionReport {
    pub running_cost: f64,
    pub initial_cost: f64,
    pub total: f64,
    pub nodes: usize,
    pub scheme: &'static str,
}

/// `sum_i h_i L((g_i + g_{i+1})/2, (g_{i+1} - g_i)/h_i)`: the midpoint rule
/// with the velocity taken as the centred difference at each midpoint.
/// Second order in the mesh width for smooth paths.
pub fn discrete_action(sigma: f64, times: &[f64], values: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..times.len().saturating_sub(1) {
        let h = times[i + 1] - times[i];
        let m = 0.5 * (values[i] + values[i + 1]);
        let v = (values[i + 1] - values[i]) / h;
        total += h * lagrangian(sigma, m, v);
    }
    total
}

/// Gradient of [`discrete_action`] with respect to every node value.
pub fn discrete_action_gradient(sigma: f64, times: &[f64], values: &[f64]) -> Vec<f64> {
    let k = flow_k(sigma);
    let mut g = vec![0.0; values.len()];
    for i in 0..times.len().saturating_sub(1) {
        let h = times[i + 1] - times[i];
        let m = 0.5 * (values[i] + values[i + 1]);
        let q = (values[i + 1] - values[i]) / h + k * m * m * m;
        let dm = 1.5 * k * m * m;
        g[i] += h * q * (dm - 1.0 / h);
        g[i + 1] += h * q * (dm + 1.0 / h);
    }
    g
}

pub fn action(sigma: f64, path: &Path, initial: &InitialCost) -> Result<ActionReport> {
    if path.len() < 2 {
        return Err(Error::invalid("action needs at least two nodes"));
    }
    let running_cost = discrete_action(sigma, path.times(), path.values());
    let initial_cost = initial.eval(path.values()[0]);
    Ok(ActionReport { running_cost, initial_cost, total: running_cost + initial_cost, nodes: path.len(), scheme: "midpoint" })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variational::zero_cost_flow;

    #[test]
    fn linear_path_benchmark_and_order() {
        let exact = 9.0 / 14.0;
        let err = |nodes: usize| {
            let p = Path::uniform(1.0, nodes, |t| t);
            (action(1.0, &p, &InitialCost::Deterministic { x0: 0.0 }).unwrap().total - exact).abs()
        };
        assert!(err(1 << 14) < 1e-6);
        let ratio = err(257) / err(513);
        assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn zero_cost_and_constant_paths() {
        let p = Path::uniform(3.0, 1 << 12, |t| zero_cost_flow(1.0, 1.0, t));
        assert!(action(1.0, &p, &InitialCost::Free).unwrap().running_cost < 1e-6);
        let p = Path::uniform(2.0, 10, |_| 0.0);
        assert_eq!(action(1.0, &p, &InitialCost::Free).unwrap().total, 0.0);
    }

    #[test]
    fn deterministic_start_charges_elsewhere() {
        let p = Path::uniform(1.0, 10, |t| 1.0 + t);
        let r = action(1.0, &p, &InitialCost::Deterministic { x0: 0.0 }).unwrap();
        assert!(r.total.is_infinite());
        let tab = InitialCost::Tabulated { xs: vec![0.0, 2.0], values: vec![0.0, 4.0] };
        assert_eq!(tab.eval(1.0), 2.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let times: Vec<f64> = (0..12).map(|i| i as f64 / 11.0).collect();
        let vals: Vec<f64> = times.iter().map(|t| (3.0 * t).sin() + 0.2).collect();
        let g = discrete_action_gradient(1.2, &times, &vals);
        for j in 0..vals.len() {
            let h = 1e-6;
            let mut up = vals.clone();
            up[j] += h;
            let mut dn = vals.clone();
            dn[j] -= h;
            let fd = (discrete_action(1.2, &times, &up) - discrete_action(1.2, &times, &dn)) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-6 * (1.0 + g[j].abs()), "{j}: {fd} vs {}", g[j]);
        }
    }
}
