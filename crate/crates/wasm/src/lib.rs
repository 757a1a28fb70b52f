//! wasm-bindgen front end for the static page in `www/`.
//!
//! Everything returns flat `Float64Array`s so the page can plot without
//! any JSON round trip.

use cwsoc::rng::stream;
use cwsoc::simulate::{simulate_critical, CriticalSpec};
use cwsoc::variational::{lagrangian, legendre_check, optimal_path, zero_cost_flow, OptimalPathOptions};
use wasm_bindgen::prelude::*;

fn js_err(e: cwsoc::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// One path of `dX = -X^3/(2 sigma^4) dt + dW`, sampled every `dt`.
#[wasm_bindgen]
pub fn critical_path(sigma: f64, x0: f64, horizon: f64, dt: f64, seed: u64, noise: bool) -> Result<Vec<f64>, JsError> {
    let spec = CriticalSpec { sigma, horizon, dt, x0, noise, record_every: 1 };
    let p = simulate_critical(&spec, &mut stream(seed)).map_err(js_err)?;
    Ok(p.values().to_vec())
}

/// Minimiser of the action between two points, with the zero-cost flow
/// from `x0` for comparison.
#[wasm_bindgen]
pub struct OptimalPathView {
    values: Vec<f64>,
    flow: Vec<f64>,
    action: f64,
    shooting_action: f64,
}

#[wasm_bindgen]
impl OptimalPathView {
    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn flow(&self) -> Vec<f64> {
        self.flow.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn action(&self) -> f64 {
        self.action
    }

    #[wasm_bindgen(getter)]
    pub fn shooting_action(&self) -> f64 {
        self.shooting_action
    }
}

#[wasm_bindgen]
pub fn optimal(sigma: f64, x0: f64, x_end: f64, horizon: f64, nodes: usize) -> Result<OptimalPathView, JsError> {
    let r = optimal_path(sigma, x0, x_end, horizon, nodes, &OptimalPathOptions::default()).map_err(js_err)?;
    let flow = r.path.times().iter().map(|&t| zero_cost_flow(sigma, x0, t)).collect();
    Ok(OptimalPathView { values: r.path.values().to_vec(), flow, action: r.action, shooting_action: r.shooting_action })
}

/// `[v, L(x, v), sup_p (p v - H(x, p))]` triples for `v` on a uniform grid.
#[wasm_bindgen]
pub fn lagrangian_curve(sigma: f64, x: f64, v_lo: f64, v_hi: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    let mut out = Vec::with_capacity(3 * points);
    for i in 0..points {
        let v = v_lo + (v_hi - v_lo) * i as f64 / (points - 1) as f64;
        let numeric = legendre_check(sigma, x, v, -20.0, 20.0, 1e-3).numeric_sup;
        out.extend([v, lagrangian(sigma, x, v), numeric]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_flow_halves() {
        let p = critical_path(1.0, 1.0, 3.0, 1e-3, 0, false).unwrap();
        assert!((p.last().unwrap() - 0.5).abs() < 1e-3);
    }

    #[test]
    fn optimal_line_cost() {
        let r = optimal(1.0, 0.0, 1.0, 1.0, 513).unwrap();
        assert!((r.action() - 9.0 / 14.0).abs() < 1e-3);
        assert_eq!(r.values().len(), r.flow().len());
    }

    #[test]
    fn curves_agree() {
        let c = lagrangian_curve(1.0, 0.5, -1.0, 1.0, 5);
        for t in c.chunks(3) {
            assert!((t[1] - t[2]).abs() < 1e-5);
        }
    }
}
