use serde::Serialize;

use crate::error::{Error, Result};
use crate::expansion::{grid_sup, hamiltonian_jet, perturbed_jet, Box2, Profile};
use crate::jet::Jet2;
use crate::model::{FluctuationScale, ScalingSchedule};
use crate::simulate::{grid, run_ensemble, SimSpec, SpinSystem, Workers};
use crate::stats::wilson;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContainmentSpec {
    /// Template run; `horizon` is fluctuation time and `params.n` is replaced
    /// along the ladder.
    pub sim: SimSpec,
    pub ns: Vec<u64>,
    /// Half-widths of the nested boxes `[-L, L]^2`, increasing.
    pub boxes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContainmentRow {
    pub n: u64,
    pub b: f64,
    pub half_width: f64,
    pub exits: u64,
    pub replicas: u64,
    pub p_hat: f64,
    pub wilson: (f64, f64),
    /// `p_hat` as text, or `"< 1/replicas"` when nothing exited.
    pub display: String,
    /// `-(b^4/n) log p_hat`, absent when `p_hat = 0`.
    pub normalized: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpsilonTelemetry {
    pub n: u64,
    /// Mean over replicas of the running maximum of `Upsilon_n`.
    pub mean_running_max: f64,
    /// Same, restricted to replicas that left the smallest box.
    pub mean_running_max_exited: Option<f64>,
    /// Grid sup of `H_n Upsilon_n` over the smallest box.
    pub sup_h_upsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContainmentTable {
    pub rows: Vec<ContainmentRow>,
    pub upsilon: Vec<UpsilonTelemetry>,
    pub decay_in_box: bool,
    pub decay_in_n: bool,
}

/// `Upsilon_n = (y^2 + F_{n,g}) / 2` with `g = log(1 + x^2)`, no cut-off.
fn upsilon_jet(sigma2: f64, b: f64, x: f64, y: f64) -> Jet2 {
    let yj = Jet2::var_y(y);
    (yj * yj + perturbed_jet(&Profile::LogOnePlusSquare, sigma2, b, x, y)).scale(0.5)
}

struct Replica {
    first_exit: Vec<bool>,
    running_max: f64,
}

pub fn containment_diagnostic(spec: &ContainmentSpec, workers: &Workers) -> Result<ContainmentTable> {
    if spec.boxes.is_empty() || spec.ns.is_empty() {
        return Err(Error::invalid("containment needs at least one box and one n"));
    }
    if spec.boxes.windows(2).any(|w| w[0] >= w[1]) || spec.boxes[0] <= 0.0 {
        return Err(Error::invalid("boxes must be positive and strictly nested"));
    }
    let schedule: &ScalingSchedule =
        spec.sim.schedule.as_ref().ok_or_else(|| Error::invalid("containment needs a scaling schedule"))?;
    let mut rows = Vec::new();
    let mut upsilon = Vec::new();
    for &n in &spec.ns {
        let mut sim = spec.sim.clone();
        sim.params = sim.params.with_n(n)?;
        sim.validate()?;
        let scale = FluctuationScale::new(sim.params, schedule)?;
        let b = scale.b;
        let s2 = sim.params.sigma2();
        let (steps, h) = grid(sim.horizon * b * b, sim.dt);
        let hash = sim.hash();
        let boxes = &spec.boxes;
        let e = run_ensemble(sim.seed, sim.replicas, &hash, workers, |_, rng| {
            let mut sys = SpinSystem::new(sim.params, sim.engine, &sim.initial, rng)?;
            let mut out = Replica { first_exit: vec![false; boxes.len()], running_max: f64::NEG_INFINITY };
            for k in 0..=steps {
                if k > 0 {
                    sys.step(h, sim.noise, rng);
                }
                let (x, y) = sys.state().reduced(&sim.params);
                let (xm, ym) = (b * x, b * y);
                let m = xm.abs().max(ym.abs());
                for (flag, half) in out.first_exit.iter_mut().zip(boxes) {
                    *flag |= m > *half;
                }
                out.running_max = out.running_max.max(upsilon_jet(s2, b, xm, ym).v);
                if *out.first_exit.last().unwrap() {
                    break;
                }
            }
            Ok(out)
        })?;
        let reps = e.outcomes.len() as u64;
        for (j, &half) in spec.boxes.iter().enumerate() {
            let exits = e.outcomes.iter().filter(|r| r.first_exit[j]).count() as u64;
            let p_hat = exits as f64 / reps as f64;
            rows.push(ContainmentRow {
                n,
                b,
                half_width: half,
                exits,
                replicas: reps,
                p_hat,
                wilson: wilson(exits, reps, 2.576),
                display: if exits == 0 { format!("< 1/{reps}") } else { format!("{p_hat:.6}") },
                normalized: (exits > 0).then(|| -(b.powi(4) / n as f64) * p_hat.ln()),
            });
        }
        let maxes: Vec<f64> = e.outcomes.iter().map(|r| r.running_max).collect();
        let exited: Vec<f64> = e.outcomes.iter().filter(|r| r.first_exit[0]).map(|r| r.running_max).collect();
        let half = spec.boxes[0];
        let sup = grid_sup(&Box2::square(half), half / 40.0, |x, y| {
            if !scale.contains(y) {
                return None;
            }
            hamiltonian_jet(&scale, x, y, &upsilon_jet(s2, b, x, y)).ok()
        });
        upsilon.push(UpsilonTelemetry {
            n,
            mean_running_max: maxes.iter().sum::<f64>() / maxes.len() as f64,
            mean_running_max_exited: (!exited.is_empty()).then(|| exited.iter().sum::<f64>() / exited.len() as f64),
            sup_h_upsilon: sup.value,
        });
    }
    let nb = spec.boxes.len();
    let at = |i: usize, j: usize| rows[i * nb + j].p_hat;
    let decay_in_box = (0..spec.ns.len()).all(|i| (1..nb).all(|j| at(i, j) <= at(i, j - 1)));
    let decay_in_n = (0..nb).all(|j| (1..spec.ns.len()).all(|i| at(i, j) <= at(i - 1, j)));
    Ok(ContainmentTable { rows, upsilon, decay_in_box, decay_in_n })
}
