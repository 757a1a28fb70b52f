use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelParams, ScalingSchedule};
use crate::rng::splitmix64;
use crate::simulate::{grid, run_ensemble, Engine, InitialCondition, Path, SpinSystem, Workers};
use crate::stats::wilson;
use crate::variational::{action, optimal_path, zero_cost_flow, InitialCost, OptimalPathOptions};

/// Nodes used when resampling `gamma` for the action and for candidate paths.
const ACTION_NODES: usize = 4097;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSpec {
    pub sigma: f64,
    /// Target path in fluctuation time; its start is the deterministic start.
    pub gamma: Path,
    pub delta: f64,
    pub ns: Vec<u64>,
    pub schedule: ScalingSchedule,
    /// Microscopic step.
    pub dt: f64,
    pub replicas: usize,
    pub seed: u64,
    pub engine: Engine,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub n: u64,
    pub b: f64,
    /// `n / b^4`.
    pub speed: f64,
    pub hits: u64,
    pub replicas: u64,
    pub p_hat: f64,
    pub wilson: (f64, f64),
    /// `-(b^4/n) log p_hat`; absent when there were no hits.
    pub normalized: Option<f64>,
    /// Normalized value at the Wilson ends (upper p gives the lower value).
    pub normalized_interval: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TubeCandidate {
    pub label: String,
    pub endpoint: f64,
    pub action: f64,
    /// Largest distance to `gamma` along the grid.
    pub max_deviation: f64,
    pub inside: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEstimate {
    pub delta: f64,
    pub horizon: f64,
    /// `I(gamma)` with the deterministic start charged at zero.
    pub gamma_action: f64,
    pub rows: Vec<RateRow>,
    pub candidates: Vec<TubeCandidate>,
    /// Smallest action among `gamma` and the candidates inside the tube.
    pub best_action: f64,
    pub positive: bool,
    pub increasing: bool,
    /// Largest-n normalized value within a factor 3 of `best_action`.
    pub within_factor_3: bool,
}

impl RateEstimate {
    pub fn verdict(&self) -> bool {
        self.positive && self.increasing && self.within_factor_3
    }
}

fn resample(gamma: &Path) -> Path {
    let t_end = *gamma.times().last().unwrap();
    let t0 = gamma.times()[0];
    Path::uniform(t_end - t0, ACTION_NODES, |t| gamma.at(t0 + t))
}

fn tube_candidates(spec: &RateSpec, gamma: &Path) -> Result<Vec<TubeCandidate>> {
    let horizon = *gamma.times().last().unwrap();
    let x0 = gamma.values()[0];
    let end = *gamma.last().unwrap();
    // shift endpoints towards the zero-cost flow, where the action drops
    let flow_end = zero_cost_flow(spec.sigma, x0, horizon);
    let dir = if flow_end < end { -1.0 } else { 1.0 };
    let opts = OptimalPathOptions::default();
    let mut out = Vec::with_capacity(5);
    for frac in [0.0, 0.25, 0.5, 0.75, 0.95] {
        let target = end + dir * frac * spec.delta;
        let p = optimal_path(spec.sigma, x0, target, horizon, ACTION_NODES, &opts)?;
        let dev = p.path.times().iter().zip(p.path.values()).map(|(&t, &v)| (v - gamma.at(t)).abs()).fold(0.0, f64::max);
        out.push(TubeCandidate {
            label: format!("optimal to gamma(T){}{:.2} delta", if dir < 0.0 { "-" } else { "+" }, frac),
            endpoint: target,
            action: p.action,
            max_deviation: dev,
            inside: dev < spec.delta,
        });
    }
    Ok(out)
}

fn tube_row(spec: &RateSpec, n: u64, gamma: &Path, workers: &Workers) -> Result<RateRow> {
    let params = ModelParams::new(spec.sigma, n)?;
    let b = spec.schedule.b(n)?;
    let horizon = *gamma.times().last().unwrap();
    let (steps, h) = grid(horizon * b * b, spec.dt);
    let b2 = b * b;
    let initial = InitialCondition::FixedReducedState { x: gamma.values()[0] / b, y: 0.0 };
    let master = splitmix64(spec.seed ^ n);
    let tag = format!("rate:{n}:{}", spec.delta);
    let e = run_ensemble(master, spec.replicas, &tag, workers, |_, rng| {
        let mut sys = SpinSystem::new(params, spec.engine, &initial, rng)?;
        for k in 1..=steps {
            sys.step(h, true, rng);
            let x = b * sys.state().reduced(&params).0;
            if (x - gamma.at(k as f64 * h / b2)).abs() >= spec.delta {
                return Ok(false);
            }
        }
        Ok(true)
    })?;
    let hits = e.outcomes.iter().filter(|v| **v).count() as u64;
    let reps = e.outcomes.len() as u64;
    let p_hat = hits as f64 / reps as f64;
    let w = wilson(hits, reps, 1.96);
    let norm = |p: f64| if p > 0.0 { -(b.powi(4) / n as f64) * p.ln() } else { f64::INFINITY };
    Ok(RateRow {
        n,
        b,
        speed: n as f64 / b.powi(4),
        hits,
        replicas: reps,
        p_hat,
        wilson: w,
        normalized: (hits > 0).then(|| norm(p_hat)),
        normalized_interval: (norm(w.1), norm(w.0)),
    })
}

/// Plain Monte Carlo tube probabilities along an `n` ladder.
pub fn estimate_rate(spec: &RateSpec, workers: &Workers) -> Result<RateEstimate> {
    if !(spec.delta > 0.0) {
        return Err(Error::invalid("tube radius must be positive"));
    }
    if spec.ns.is_empty() || spec.replicas == 0 {
        return Err(Error::invalid("rate estimation needs a ladder and replicas"));
    }
    if spec.gamma.times()[0] != 0.0 {
        return Err(Error::invalid("gamma must start at t = 0"));
    }
    let mut ns = spec.ns.clone();
    ns.sort_unstable();
    spec.schedule.check_admissible(&ns)?;
    let gamma = resample(&spec.gamma);
    let x0 = gamma.values()[0];
    let gamma_action = action(spec.sigma, &gamma, &InitialCost::Deterministic { x0 })?.total;

    let mut rows = Vec::with_capacity(ns.len());
    for (i, &n) in ns.iter().enumerate() {
        let row = tube_row(spec, n, &spec.gamma, workers)?;
        if i == 0 && row.hits == 0 {
            return Err(Error::RateNotEstimable(format!(
                "no tube hits in {} replicas at the smallest n = {n}",
                row.replicas
            )));
        }
        rows.push(row);
    }
    let candidates = tube_candidates(spec, &gamma)?;
    let best_action = candidates.iter().filter(|c| c.inside).map(|c| c.action).fold(gamma_action, f64::min);
    let vals: Vec<Option<f64>> = rows.iter().map(|r| r.normalized).collect();
    let positive = vals.iter().all(|v| matches!(v, Some(x) if *x > 0.0));
    let increasing = positive && vals.windows(2).all(|w| w[1].unwrap() > w[0].unwrap());
    let within_factor_3 = match vals.last().copied().flatten() {
        Some(v) if best_action > 0.0 => v <= 3.0 * best_action && v >= best_action / 3.0,
        _ => false,
    };
    Ok(RateEstimate {
        delta: spec.delta,
        horizon: *gamma.times().last().unwrap(),
        gamma_action,
        rows,
        candidates,
        best_action,
        positive,
        increasing,
        within_factor_3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(gamma: Path, delta: f64, replicas: usize) -> RateSpec {
        RateSpec {
            sigma: 1.0,
            gamma,
            delta,
            ns: vec![1 << 8, 1 << 10],
            schedule: ScalingSchedule::power(0.125).unwrap(),
            dt: 1e-2,
            replicas,
            seed: 5,
            engine: Engine::Projected,
        }
    }

    #[test]
    fn typical_tube_is_almost_sure() {
        let g = Path::uniform(1.0, 11, |_| 0.0);
        let r = estimate_rate(&spec(g, 1.0, 200), &Workers::sequential()).unwrap();
        assert!(r.gamma_action < 1e-12);
        for row in &r.rows {
            assert!(row.p_hat > 0.95, "{row:?}");
        }
    }

    #[test]
    fn impossible_tube_is_refused() {
        let g = Path::uniform(1.0, 11, |t| 40.0 * t);
        let e = estimate_rate(&spec(g, 0.01, 20), &Workers::sequential());
        assert!(matches!(e, Err(Error::RateNotEstimable(_))));
    }

    #[test]
    fn candidates_do_not_exceed_gamma_action() {
        let g = Path::uniform(1.0, 3, |t| 0.8 * t);
        let s = spec(g.clone(), 0.25, 1);
        let c = tube_candidates(&s, &resample(&g)).unwrap();
        let ga = action(1.0, &resample(&g), &InitialCost::Deterministic { x0: 0.0 }).unwrap().total;
        assert_eq!(c.len(), 5);
        for w in c.windows(2) {
            assert!(w[1].action < w[0].action);
        }
        assert!(c[0].action <= ga + 1e-9);
    }
}
