//! Stochastic integrators for the microscopic, reduced and limiting
//! processes, the Gibbs sampler, and the seeded ensemble runner.
//!
//! `SimSpec::dt` is always a step in microscopic time. Integrators that run
//! on another clock (the fluctuation process runs `b_n^2` times faster)
//! convert it themselves.

mod ensemble;
mod full;
mod gibbs;
mod limits;
mod reduced;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, ScalingSchedule};

pub use ensemble::{run_ensemble, EnsembleResult, Workers};
pub use full::{simulate_full, FullState, SpinSystem};
pub use gibbs::{sample_gibbs, static_law_fit, GibbsRun, GibbsSpec, StaticLawFit};
pub use limits::{ou_moments, simulate_critical, simulate_ou, CriticalSpec, OuSpec};
pub use reduced::{simulate_fluctuation, simulate_reduced, FluctuationMethod, ReducedRun};

/// Starting point of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialCondition {
    /// Spins i.i.d. `N(0, sigma^2)`.
    IidGaussian,
    /// An explicit spin vector of length `n`.
    FixedConfiguration(Vec<f64>),
    /// A raw-frame reduced state `(S/n, T/n - sigma^2)`.
    FixedReducedState { x: f64, y: f64 },
}

/// How the microscopic system is advanced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Every spin is stepped.
    Spins,
    /// The Euler-Maruyama update is exchangeable, so the pair `(S, T)`
    /// evolves as a closed Markov chain: the mean direction and the norm of
    /// the orthogonal component are updated with three scalar draws per
    /// step. Same law as `Spins`, O(1) per step.
    #[default]
    Projected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub params: ModelParams,
    pub schedule: Option<ScalingSchedule>,
    pub horizon: f64,
    pub dt: f64,
    pub initial: InitialCondition,
    pub seed: u64,
    pub replicas: usize,
    /// Record every `k`-th step; 0 records only the two endpoints.
    pub record_every: usize,
    /// Switches the Brownian increments off.
    pub noise: bool,
    pub engine: Engine,
}

impl SimSpec {
    pub fn new(params: ModelParams, horizon: f64, dt: f64) -> Self {
        Self {
            params,
            schedule: None,
            horizon,
            dt,
            initial: InitialCondition::IidGaussian,
            seed: 0,
            replicas: 1,
            record_every: 0,
            noise: true,
            engine: Engine::Projected,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be >= 0, got {}", self.horizon)));
        }
        if self.replicas == 0 {
            return Err(Error::invalid("replicas must be >= 1"));
        }
        if let InitialCondition::FixedConfiguration(z) = &self.initial {
            if z.len() as u64 != self.params.n() {
                return Err(Error::invalid(format!("configuration has {} spins, n = {}", z.len(), self.params.n())));
            }
        }
        Ok(())
    }

    /// Rejects `dt > sigma^2 / 10`.
    pub fn check_stiffness(&self) -> Result<()> {
        let limit = self.params.sigma2() / 10.0;
        if self.dt > limit {
            return Err(Error::StepTooLarge { dt: self.dt, limit });
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("spec serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Step count and effective step for covering `horizon` with steps no
/// longer than `dt`.
pub(crate) fn grid(horizon: f64, dt: f64) -> (usize, f64) {
    if horizon == 0.0 {
        return (0, 0.0);
    }
    let steps = (horizon / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (steps, horizon / steps as f64)
}

pub(crate) fn records(step: usize, steps: usize, every: usize) -> bool {
    step == 0 || step == steps || (every > 0 && step % every == 0)
}

/// A time grid with values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path<V = f64> {
    times: Vec<f64>,
    values: Vec<V>,
}

impl<V> Path<V> {
    pub fn new(times: Vec<f64>, values: Vec<V>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::invalid(format!("{} times but {} values", times.len(), values.len())));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("path times must be strictly increasing"));
        }
        Ok(Self { times, values })
    }

    pub(crate) fn with_capacity(cap: usize) -> Self {
        Self { times: Vec::with_capacity(cap), values: Vec::with_capacity(cap) }
    }

    pub(crate) fn push(&mut self, t: f64, v: V) {
        self.times.push(t);
        self.values.push(v);
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[V] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&V> {
        self.values.last()
    }

    pub fn first(&self) -> Option<&V> {
        self.values.first()
    }

    pub fn map<W>(&self, f: impl Fn(f64, &V) -> W) -> Path<W> {
        Path { times: self.times.clone(), values: self.times.iter().zip(&self.values).map(|(&t, v)| f(t, v)).collect() }
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<V>) {
        (self.times, self.values)
    }
}

impl Path<f64> {
    /// Linear interpolation; constant beyond the ends.
    pub fn at(&self, t: f64) -> f64 {
        let ts = &self.times;
        if t <= ts[0] {
            return self.values[0];
        }
        let last = ts.len() - 1;
        if t >= ts[last] {
            return self.values[last];
        }
        let i = ts.partition_point(|&s| s <= t) - 1;
        let w = (t - ts[i]) / (ts[i + 1] - ts[i]);
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    pub fn uniform(t_end: f64, points: usize, f: impl Fn(f64) -> f64) -> Self {
        let times: Vec<f64> = (0..points).map(|i| t_end * i as f64 / (points - 1) as f64).collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self { times, values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_horizon() {
        assert_eq!(grid(1.0, 1e-3), (1000, 1e-3));
        let (s, h) = grid(1.0, 0.3);
        assert_eq!(s, 4);
        assert_eq!(h, 0.25);
        assert_eq!(grid(0.0, 0.1).0, 0);
    }

    #[test]
    fn path_rejects_bad_grids() {
        assert!(Path::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(Path::new(vec![0.0, 1.0], vec![1.0]).is_err());
        let p = Path::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 0.0]).unwrap();
        assert_eq!(p.at(0.5), 1.0);
        assert_eq!(p.at(2.0), 1.0);
        assert_eq!(p.at(9.0), 0.0);
    }

    #[test]
    fn stiffness_guard() {
        let spec = SimSpec::new(ModelParams::new(1.0, 4).unwrap(), 1.0, 0.2);
        assert!(matches!(spec.check_stiffness(), Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn hash_tracks_content() {
        let a = SimSpec::new(ModelParams::new(1.0, 4).unwrap(), 1.0, 0.01);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }
}
