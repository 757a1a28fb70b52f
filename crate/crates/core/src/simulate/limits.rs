use rand::{Rng, RngExt};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{grid, records, Path};
use crate::error::{Error, Result};

/// `dX = -X^3/(2 sigma^4) dt + dB`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalSpec {
    pub sigma: f64,
    pub horizon: f64,
    pub dt: f64,
    pub x0: f64,
    pub noise: bool,
    pub record_every: usize,
}

/// `dY = -Y/sigma^2 dt + 2 sigma dB`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuSpec {
    pub sigma: f64,
    pub horizon: f64,
    pub dt: f64,
    pub y0: f64,
    pub record_every: usize,
}

fn check(sigma: f64, horizon: f64, dt: f64) -> Result<()> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return Err(Error::invalid(format!("need dt > 0 and horizon >= 0, got dt={dt}, T={horizon}")));
    }
    Ok(())
}

/// Euler-Maruyama for the critical SDE.
pub fn simulate_critical<R: Rng + ?Sized>(spec: &CriticalSpec, rng: &mut R) -> Result<Path> {
    check(spec.sigma, spec.horizon, spec.dt)?;
    let k = 1.0 / (2.0 * spec.sigma.powi(4));
    let (steps, h) = grid(spec.horizon, spec.dt);
    let sq = h.sqrt();
    let mut x = spec.x0;
    let mut path = Path::with_capacity(2);
    path.push(0.0, x);
    for i in 1..=steps {
        let xi: f64 = if spec.noise { rng.sample(StandardNormal) } else { 0.0 };
        x += -k * x * x * x * h + sq * xi;
        if records(i, steps, spec.record_every) {
            path.push(i as f64 * h, x);
        }
    }
    Ok(path)
}

/// Exact Gaussian transitions of the Ornstein-Uhlenbeck limit.
pub fn simulate_ou<R: Rng + ?Sized>(spec: &OuSpec, rng: &mut R) -> Result<Path> {
    check(spec.sigma, spec.horizon, spec.dt)?;
    let s2 = spec.sigma * spec.sigma;
    let (steps, h) = grid(spec.horizon, spec.dt);
    let decay = (-h / s2).exp();
    let sd = (2.0 * s2 * s2 * (1.0 - decay * decay)).sqrt();
    let mut y = spec.y0;
    let mut path = Path::with_capacity(2);
    path.push(0.0, y);
    for i in 1..=steps {
        let xi: f64 = rng.sample(StandardNormal);
        y = y * decay + sd * xi;
        if records(i, steps, spec.record_every) {
            path.push(i as f64 * h, y);
        }
    }
    Ok(path)
}

/// Mean and variance of `Y(t)` given `Y(0) = y0`.
pub fn ou_moments(sigma: f64, y0: f64, t: f64) -> (f64, f64) {
    let s2 = sigma * sigma;
    (y0 * (-t / s2).exp(), 2.0 * s2 * s2 * (1.0 - (-2.0 * t / s2).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn deterministic_critical_flow() {
        let spec = CriticalSpec { sigma: 1.0, horizon: 3.0, dt: 1e-3, x0: 1.0, noise: false, record_every: 0 };
        let p = simulate_critical(&spec, &mut stream(0)).unwrap();
        assert!((p.last().unwrap() - 0.5).abs() < 1e-3);
    }

    #[test]
    fn ou_moment_formulas() {
        let (m, v) = ou_moments(1.0, 4.0, 2.0);
        assert!((m - 4.0 * (-2.0f64).exp()).abs() < 1e-15);
        assert!((m - 0.5413).abs() < 1e-4);
        assert!((v - 2.0 * (1.0 - (-4.0f64).exp())).abs() < 1e-15);
        assert!((ou_moments(1.0, 0.0, 1e3).1 - 2.0).abs() < 1e-15);
        assert!(ou_moments(1.0, 0.0, 1e-9).1 < 1e-8);
        assert!((ou_moments(2.0, 0.0, 1e4).1 - 32.0).abs() < 1e-12);
    }

    #[test]
    fn ou_stationary_variance() {
        let spec = OuSpec { sigma: 1.0, horizon: 20.0, dt: 0.5, y0: 0.0, record_every: 0 };
        let mut rng = stream(11);
        let ys: Vec<f64> = (0..4000).map(|_| *simulate_ou(&spec, &mut rng).unwrap().last().unwrap()).collect();
        let s = crate::stats::summarize(&ys);
        assert!((s.variance - 2.0).abs() < 3.0 * s.var_se, "{s:?}");
    }

    #[test]
    fn ou_mean_decay_example() {
        let (m, _) = ou_moments(1.0, 4.0, 2.0);
        assert!((m - 0.5413).abs() < 1e-4);
    }

    #[test]
    fn critical_long_run_law_and_symmetry() {
        let spec = CriticalSpec { sigma: 1.0, horizon: 50.0, dt: 1e-2, x0: 0.0, noise: true, record_every: 0 };
        let ends: Vec<f64> =
            (0..4000).map(|i| *simulate_critical(&spec, &mut crate::rng::replica_stream(17, i)).unwrap().last().unwrap()).collect();
        let cdf = crate::stats::TabulatedCdf::new(|x| -x.powi(4) / 4.0, -10.0, 10.0, 20_001);
        let ks = crate::stats::ks_one_sample(&ends, |x| cdf.cdf(x));
        assert!(ks.p_value > 0.01, "{ks:?}");
        let s = crate::stats::summarize(&ends);
        assert!(s.skewness.abs() < 3.0 * s.skew_se, "{s:?}");
    }
}
