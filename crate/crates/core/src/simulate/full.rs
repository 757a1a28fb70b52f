use rand::{Rng, RngExt};
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use super::{grid, records, Engine, InitialCondition, Path, SimSpec};
use crate::error::{Error, Result};
use crate::model::{drift_from_ratio, ModelParams};

/// Sufficient statistics of the spin system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullState {
    /// `S = sum z_i`.
    pub s: f64,
    /// `T = sum z_i^2`.
    pub t: f64,
}

impl FullState {
    /// Raw-frame pair `(S/n, T/n - sigma^2)`.
    pub fn reduced(&self, params: &ModelParams) -> (f64, f64) {
        let n = params.nf();
        (self.s / n, self.t / n - params.sigma2())
    }
}

/// One microscopic system advanced by Euler-Maruyama.
///
/// Writing the update as `z' = c z + d 1 + sqrt(dt) xi` with
/// `c = 1 - dt (1/sigma^2 + a^2)/2`, `d = dt a / 2`, `a = S/(T+1)`, the
/// projected engine tracks `u = S/sqrt(n)` and `w = T - S^2/n` (squared
/// norm of the component orthogonal to the constant vector):
/// `u' = c u + d sqrt(n) + sqrt(dt) alpha`,
/// `w' = (c sqrt(w) + sqrt(dt) beta)^2 + dt chi^2_{n-2}`.
#[derive(Debug, Clone)]
pub enum SpinSystem {
    Spins { params: ModelParams, z: Vec<f64> },
    Projected { params: ModelParams, u: f64, w: f64, chi: Option<ChiSquared<f64>> },
}

impl SpinSystem {
    pub fn new<R: Rng + ?Sized>(params: ModelParams, engine: Engine, initial: &InitialCondition, rng: &mut R) -> Result<Self> {
        let n = params.n() as usize;
        let sigma = params.sigma();
        let chi = if n > 2 { Some(ChiSquared::new((n - 2) as f64).expect("positive dof")) } else { None };
        match (engine, initial) {
            (Engine::Spins, InitialCondition::IidGaussian) => {
                let z = (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect();
                Ok(SpinSystem::Spins { params, z })
            }
            (Engine::Spins, InitialCondition::FixedConfiguration(z)) => Ok(SpinSystem::Spins { params, z: z.clone() }),
            (Engine::Spins, InitialCondition::FixedReducedState { x, y }) => {
                let z = configuration_for(&params, *x, *y)?;
                Ok(SpinSystem::Spins { params, z })
            }
            (Engine::Projected, InitialCondition::IidGaussian) => {
                let u = sigma * rng.sample::<f64, _>(StandardNormal);
                let w = if n > 1 {
                    let c = ChiSquared::new((n - 1) as f64).expect("positive dof");
                    params.sigma2() * c.sample(rng)
                } else {
                    0.0
                };
                Ok(SpinSystem::Projected { params, u, w, chi })
            }
            (Engine::Projected, InitialCondition::FixedConfiguration(z)) => {
                let s: f64 = z.iter().sum();
                let t: f64 = z.iter().map(|v| v * v).sum();
                let u = s / (n as f64).sqrt();
                Ok(SpinSystem::Projected { params, u, w: (t - s * s / n as f64).max(0.0), chi })
            }
            (Engine::Projected, InitialCondition::FixedReducedState { x, y }) => {
                let nf = n as f64;
                let w = nf * (y + params.sigma2()) - nf * x * x;
                check_reduced(&params, *x, *y, w)?;
                Ok(SpinSystem::Projected { params, u: x * nf.sqrt(), w: w.max(0.0), chi })
            }
        }
    }

    pub fn params(&self) -> &ModelParams {
        match self {
            SpinSystem::Spins { params, .. } | SpinSystem::Projected { params, .. } => params,
        }
    }

    pub fn state(&self) -> FullState {
        match self {
            SpinSystem::Spins { z, .. } => FullState { s: z.iter().sum(), t: z.iter().map(|v| v * v).sum() },
            SpinSystem::Projected { params, u, w, .. } => {
                FullState { s: u * params.nf().sqrt(), t: u * u + w }
            }
        }
    }

    pub fn step<R: Rng + ?Sized>(&mut self, dt: f64, noise: bool, rng: &mut R) {
        let sq = dt.sqrt();
        match self {
            SpinSystem::Spins { params, z } => {
                let s: f64 = z.iter().sum();
                let t: f64 = z.iter().map(|v| v * v).sum();
                let a = s / (t + 1.0);
                let s2 = params.sigma2();
                for zj in z.iter_mut() {
                    let drift = drift_from_ratio(s2, *zj, a);
                    let xi: f64 = if noise { rng.sample(StandardNormal) } else { 0.0 };
                    *zj += drift * dt + sq * xi;
                }
            }
            SpinSystem::Projected { params, u, w, chi } => {
                let nf = params.nf();
                let rn = nf.sqrt();
                let t = *u * *u + *w;
                let a = *u * rn / (t + 1.0);
                let c = 1.0 - 0.5 * dt * (1.0 / params.sigma2() + a * a);
                let d = 0.5 * dt * a;
                let (alpha, beta, rest) = if noise {
                    let alpha: f64 = rng.sample(StandardNormal);
                    let beta: f64 = if params.n() >= 2 { rng.sample(StandardNormal) } else { 0.0 };
                    let rest = chi.as_ref().map_or(0.0, |c| c.sample(rng));
                    (alpha, beta, rest)
                } else {
                    (0.0, 0.0, 0.0)
                };
                *u = c * *u + d * rn + sq * alpha;
                if params.n() >= 2 {
                    let v = c * w.sqrt() + sq * beta;
                    *w = v * v + dt * rest;
                }
            }
        }
    }
}

fn check_reduced(params: &ModelParams, x: f64, y: f64, w: f64) -> Result<()> {
    if w < -1e-12 * params.nf() * (y + params.sigma2()).abs().max(1.0) {
        return Err(Error::OutsideStateSpace { x, y, reason: "y + sigma^2 < x^2".into() });
    }
    if params.n() == 1 && w.abs() > 1e-12 * (y + params.sigma2()).abs().max(1.0) {
        return Err(Error::OutsideStateSpace { x, y, reason: "n = 1 requires y + sigma^2 = x^2".into() });
    }
    Ok(())
}

/// A spin vector with prescribed `(S/n, T/n - sigma^2)`: the mean plus a
/// zero-sum alternating pattern carrying the remaining norm.
fn configuration_for(params: &ModelParams, x: f64, y: f64) -> Result<Vec<f64>> {
    let n = params.n() as usize;
    let nf = n as f64;
    let w = nf * (y + params.sigma2()) - nf * x * x;
    check_reduced(params, x, y, w)?;
    let mut r = vec![0.0; n];
    if n >= 2 {
        let pairs = n / 2;
        let amp = (w.max(0.0) / (2 * pairs) as f64).sqrt();
        for i in 0..pairs {
            r[2 * i] = amp;
            r[2 * i + 1] = -amp;
        }
    }
    Ok(r.into_iter().map(|v| x + v).collect())
}

/// Euler-Maruyama for the full system, recorded as the raw reduced pair.
pub fn simulate_full<R: Rng + ?Sized>(spec: &SimSpec, rng: &mut R) -> Result<Path<(f64, f64)>> {
    spec.validate()?;
    spec.check_stiffness()?;
    let mut sys = SpinSystem::new(spec.params, spec.engine, &spec.initial, rng)?;
    let (steps, h) = grid(spec.horizon, spec.dt);
    let mut path = Path::with_capacity(if spec.record_every == 0 { 2 } else { steps / spec.record_every + 2 });
    path.push(0.0, sys.state().reduced(&spec.params));
    for k in 1..=steps {
        sys.step(h, spec.noise, rng);
        if records(k, steps, spec.record_every) {
            path.push(k as f64 * h, sys.state().reduced(&spec.params));
        }
    }
    Ok(path)
}
