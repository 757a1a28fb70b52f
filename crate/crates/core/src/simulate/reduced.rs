use rand::{Rng, RngExt};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::full::SpinSystem;
use super::{grid, records, simulate_full, Engine, Path, SimSpec};
use crate::error::{Error, Result};
use crate::model::{reduced_coefficients, Coefficients2, FluctuationScale, ReducedState};

/// Path plus diffusion-clamp telemetry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedRun {
    pub path: Path<(f64, f64)>,
    pub steps: usize,
    pub clamped: usize,
}

impl ReducedRun {
    pub fn clamp_fraction(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.clamped as f64 / self.steps as f64
        }
    }
}

const CLAMP_LIMIT: f64 = 0.01;

/// Lower Cholesky factor of a 2x2 symmetric matrix with the Schur
/// complement clamped at zero. The flag reports whether the clamp fired.
fn cholesky(a: &[[f64; 2]; 2]) -> ([f64; 3], bool) {
    let l11 = a[0][0].max(0.0).sqrt();
    let l21 = if l11 > 0.0 { a[0][1] / l11 } else { 0.0 };
    let schur = a[1][1] - l21 * l21;
    let clamped = schur < 0.0;
    ([l11, l21, schur.max(0.0).sqrt()], clamped)
}

fn em_step<R: Rng + ?Sized>(state: &mut (f64, f64), c: &Coefficients2, h: f64, noise: bool, rng: &mut R) -> bool {
    let (l, clamped) = cholesky(&c.diffusion);
    let (z1, z2): (f64, f64) = if noise { (rng.sample(StandardNormal), rng.sample(StandardNormal)) } else { (0.0, 0.0) };
    let sq = h.sqrt();
    state.0 += c.drift[0] * h + sq * l[0] * z1;
    state.1 += c.drift[1] * h + sq * (l[1] * z1 + l[2] * z2);
    clamped
}

fn initial_raw<R: Rng + ?Sized>(spec: &SimSpec, rng: &mut R) -> Result<(f64, f64)> {
    let sys = SpinSystem::new(spec.params, Engine::Projected, &spec.initial, rng)?;
    Ok(sys.state().reduced(&spec.params))
}

fn finish(path: Path<(f64, f64)>, steps: usize, clamped: usize) -> Result<ReducedRun> {
    let run = ReducedRun { path, steps, clamped };
    if run.clamp_fraction() > CLAMP_LIMIT {
        return Err(Error::ClampRate { fraction: run.clamp_fraction() });
    }
    Ok(run)
}

/// Euler-Maruyama for the reduced two-dimensional diffusion (raw frame).
pub fn simulate_reduced<R: Rng + ?Sized>(spec: &SimSpec, rng: &mut R) -> Result<ReducedRun> {
    spec.validate()?;
    spec.check_stiffness()?;
    let mut st = initial_raw(spec, rng)?;
    let (steps, h) = grid(spec.horizon, spec.dt);
    let mut path = Path::with_capacity(2);
    path.push(0.0, st);
    let mut clamped = 0;
    for k in 1..=steps {
        let c = reduced_coefficients(&spec.params, ReducedState::raw(st.0, st.1))?;
        clamped += em_step(&mut st, &c, h, spec.noise, rng) as usize;
        if records(k, steps, spec.record_every) {
            path.push(k as f64 * h, st);
        }
    }
    finish(path, steps, clamped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluctuationMethod {
    /// Run the microscopic system and rescale.
    #[default]
    Transformed,
    /// Integrate the rescaled generator directly.
    Direct,
}

/// Moderate-frame process `(b x(b^2 t), b y(b^2 t))` on fluctuation time
/// `[0, spec.horizon]`.
pub fn simulate_fluctuation<R: Rng + ?Sized>(spec: &SimSpec, method: FluctuationMethod, rng: &mut R) -> Result<ReducedRun> {
    spec.validate()?;
    let schedule = spec.schedule.as_ref().ok_or_else(|| Error::invalid("fluctuation run needs a scaling schedule"))?;
    let scale = FluctuationScale::new(spec.params, schedule)?;
    let b = scale.b;
    let b2 = b * b;
    match method {
        FluctuationMethod::Transformed => {
            let mut micro = spec.clone();
            micro.horizon = spec.horizon * b2;
            let raw = simulate_full(&micro, rng)?;
            let (times, values) = raw.into_parts();
            let path = Path::new(
                times.into_iter().map(|t| t / b2).collect(),
                values.into_iter().map(|(x, y)| (b * x, b * y)).collect(),
            )?;
            let steps = path.len().saturating_sub(1);
            Ok(ReducedRun { path, steps, clamped: 0 })
        }
        FluctuationMethod::Direct => {
            spec.check_stiffness()?;
            let raw0 = initial_raw(spec, rng)?;
            let mut st = (b * raw0.0, b * raw0.1);
            let (steps, h_micro) = grid(spec.horizon * b2, spec.dt);
            let h = h_micro / b2;
            let mut path = Path::with_capacity(2);
            path.push(0.0, st);
            let mut clamped = 0;
            for k in 1..=steps {
                let g = scale.coefficients(ReducedState::moderate(st.0, st.1))?;
                let c = g.as_diffusion();
                clamped += em_step(&mut st, &c, h, spec.noise, rng) as usize;
                if records(k, steps, spec.record_every) {
                    path.push(k as f64 * h, st);
                }
            }
            finish(path, steps, clamped)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelParams, ScalingSchedule};
    use crate::rng::stream;
    use crate::simulate::InitialCondition;

    #[test]
    fn cholesky_reconstructs() {
        let a = [[2.0, 0.6], [0.6, 1.0]];
        let (l, c) = cholesky(&a);
        assert!(!c);
        assert!((l[0] * l[0] - 2.0).abs() < 1e-15);
        assert!((l[0] * l[1] - 0.6).abs() < 1e-15);
        assert!((l[1] * l[1] + l[2] * l[2] - 1.0).abs() < 1e-15);
        assert!(cholesky(&[[1.0, 2.0], [2.0, 1.0]]).1);
    }

    #[test]
    fn x_drift_vanishes_from_zero_without_noise() {
        let mut s = SimSpec::new(ModelParams::new(1.0, 50).unwrap(), 1.0, 0.01);
        s.noise = false;
        s.initial = InitialCondition::FixedReducedState { x: 0.0, y: 0.5 };
        let run = simulate_reduced(&s, &mut stream(0)).unwrap();
        let &(x, y) = run.path.last().unwrap();
        assert_eq!(x, 0.0);
        assert!(y < 0.5 && y > 0.0);
    }

    #[test]
    fn unit_scale_matches_reduced() {
        let n = 40;
        let mut s = SimSpec::new(ModelParams::new(1.0, n).unwrap(), 0.5, 0.01);
        s.initial = InitialCondition::FixedReducedState { x: 0.1, y: 0.2 };
        s.record_every = 1;
        s.schedule = Some(ScalingSchedule::single(n, 1.0).unwrap());
        let a = simulate_reduced(&s, &mut stream(9)).unwrap();
        let b = simulate_fluctuation(&s, FluctuationMethod::Direct, &mut stream(9)).unwrap();
        assert_eq!(a.path.times(), b.path.times());
        for (p, q) in a.path.values().iter().zip(b.path.values()) {
            assert!((p.0 - q.0).abs() < 1e-12 && (p.1 - q.1).abs() < 1e-12);
        }
    }

    #[test]
    fn fluctuation_stays_in_state_space() {
        let n = 10_000;
        let mut s = SimSpec::new(ModelParams::new(1.0, n).unwrap(), 0.2, 1e-3);
        s.schedule = Some(ScalingSchedule::power(0.125).unwrap());
        s.record_every = 1;
        let run = simulate_fluctuation(&s, FluctuationMethod::Transformed, &mut stream(2)).unwrap();
        let floor = -s.schedule.as_ref().unwrap().b(n).unwrap();
        assert!(run.path.values().iter().all(|&(_, y)| y > floor));
    }
}
