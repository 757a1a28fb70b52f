use std::collections::BTreeMap;

use serde::Serialize;

use super::{LimitTestReport, ALPHA};
use crate::error::{Error, Result};
use crate::rng::splitmix64;
use crate::simulate::{
    ou_moments, run_ensemble, simulate_critical, simulate_full, CriticalSpec, Path, SimSpec, Workers,
};
use crate::stats::{ks_one_sample, ks_two_sample, median, normal_cdf, summarize};

fn endpoints(spec: &SimSpec, workers: &Workers) -> Result<Vec<((f64, f64), (f64, f64))>> {
    let mut s = spec.clone();
    s.record_every = 0;
    let hash = s.hash();
    let e = run_ensemble(s.seed, s.replicas, &hash, workers, |_, rng| {
        let p: Path<(f64, f64)> = simulate_full(&s, rng)?;
        Ok((*p.first().unwrap(), *p.last().unwrap()))
    })?;
    Ok(e.outcomes)
}

fn require_replicas(spec: &SimSpec, min: usize) -> Result<()> {
    if spec.replicas < min {
        return Err(Error::invalid(format!("need at least {min} replicas, got {}", spec.replicas)));
    }
    Ok(())
}

/// One-sample KS of `(S_n(t) - S_n(0))/sqrt(n)` against `N(0, t)`, with
/// `t = spec.horizon`.
pub fn check_clt_increment(spec: &SimSpec, workers: &Workers) -> Result<LimitTestReport> {
    require_replicas(spec, 500)?;
    let t = spec.horizon;
    let rn = spec.params.nf().sqrt();
    let inc: Vec<f64> = endpoints(spec, workers)?.into_iter().map(|(a, b)| rn * (b.0 - a.0)).collect();
    let sum = summarize(&inc);
    let mut extra = BTreeMap::new();
    extra.insert("t".into(), t);
    extra.insert("variance".into(), sum.variance);
    extra.insert("variance_se".into(), sum.var_se);
    if t == 0.0 {
        let all_zero = inc.iter().all(|v| *v == 0.0);
        return Ok(LimitTestReport {
            name: "clt-increment".into(),
            sizes: vec![inc.len()],
            statistic: 0.0,
            p_value: 1.0,
            alpha: ALPHA,
            pass: all_zero,
            degenerate: true,
            extra,
        });
    }
    let sd = t.sqrt();
    let ks = ks_one_sample(&inc, |x| normal_cdf(x / sd));
    Ok(LimitTestReport {
        name: "clt-increment".into(),
        sizes: vec![inc.len()],
        statistic: ks.statistic,
        p_value: ks.p_value,
        alpha: ALPHA,
        pass: ks.p_value > ALPHA,
        degenerate: false,
        extra,
    })
}

/// `Y = sqrt(n)(T_n/n - sigma^2)` at `t = spec.horizon`. The KS test uses
/// `Y(t) - Y(0) e^{-t/sigma^2}` against `N(0, 2 sigma^4 (1 - e^{-2t/sigma^2}))`;
/// when `t >= 5 sigma^2` the sample variance of `Y(t)` must also lie within
/// three standard errors of `2 sigma^4`.
pub fn check_ou_limit(spec: &SimSpec, workers: &Workers) -> Result<LimitTestReport> {
    require_replicas(spec, 100)?;
    let sigma = spec.params.sigma();
    let s2 = spec.params.sigma2();
    let t = spec.horizon;
    let rn = spec.params.nf().sqrt();
    let pairs = endpoints(spec, workers)?;
    let (decay, var) = {
        let (m, v) = ou_moments(sigma, 1.0, t);
        (m, v)
    };
    let resid: Vec<f64> = pairs.iter().map(|(a, b)| rn * b.1 - decay * rn * a.1).collect();
    let y_end: Vec<f64> = pairs.iter().map(|(_, b)| rn * b.1).collect();
    let ks = ks_one_sample(&resid, |x| normal_cdf(x / var.sqrt()));
    let sum = summarize(&y_end);
    let stationary = t >= 5.0 * s2;
    let target = 2.0 * s2 * s2;
    let var_ok = !stationary || (sum.variance - target).abs() <= 3.0 * sum.var_se;
    let mut extra = BTreeMap::new();
    extra.insert("t".into(), t);
    extra.insert("variance".into(), sum.variance);
    extra.insert("variance_se".into(), sum.var_se);
    extra.insert("stationary_variance".into(), target);
    extra.insert("stationary".into(), stationary as u8 as f64);
    extra.insert("variance_within_3se".into(), var_ok as u8 as f64);
    Ok(LimitTestReport {
        name: "ou-limit".into(),
        sizes: vec![resid.len()],
        statistic: ks.statistic,
        p_value: ks.p_value,
        alpha: ALPHA,
        pass: ks.p_value > ALPHA && var_ok,
        degenerate: false,
        extra,
    })
}

/// Two-sample KS between `n^{-3/4} S_n(sqrt(n) t)` and the critical SDE at
/// time `t`. The microscopic side starts from i.i.d. spins, so
/// `n^{-3/4} S_n(0) ~ N(0, sigma^2 n^{-1/2})`; the SDE side draws its
/// starting point from the same law.
pub fn check_critical_limit(spec: &SimSpec, t: f64, workers: &Workers) -> Result<LimitTestReport> {
    require_replicas(spec, 100)?;
    let n = spec.params.nf();
    let q = n.powf(0.25);
    let mut micro = spec.clone();
    micro.horizon = n.sqrt() * t;
    let pairs = endpoints(&micro, workers)?;
    let xs: Vec<f64> = pairs.iter().map(|(_, b)| q * b.0).collect();
    let collapse: Vec<f64> = pairs.iter().map(|(_, b)| (q * b.1).abs()).collect();

    let sigma = spec.params.sigma();
    let sd0 = sigma / q;
    let crit = CriticalSpec { sigma, horizon: t, dt: spec.dt, x0: 0.0, noise: spec.noise, record_every: 0 };
    let master = splitmix64(spec.seed ^ 0x00C0_FFEE);
    let limit = run_ensemble(master, spec.replicas, "critical-sde", workers, |_, rng| {
        use rand::RngExt;
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        let mut c = crit;
        c.x0 = sd0 * z;
        Ok(*simulate_critical(&c, rng)?.last().unwrap())
    })?;
    let degenerate = xs.iter().all(|v| *v == xs[0]) && limit.outcomes.iter().all(|v| *v == xs[0]);
    let ks = ks_two_sample(&xs, &limit.outcomes);
    let mut extra = BTreeMap::new();
    extra.insert("t".into(), t);
    extra.insert("collapse_median".into(), median(&collapse));
    extra.insert("micro_variance".into(), summarize(&xs).variance);
    extra.insert("sde_variance".into(), summarize(&limit.outcomes).variance);
    Ok(LimitTestReport {
        name: "critical-limit".into(),
        sizes: vec![xs.len(), limit.outcomes.len()],
        statistic: ks.statistic,
        p_value: if degenerate { 1.0 } else { ks.p_value },
        alpha: ALPHA,
        pass: degenerate || ks.p_value > ALPHA,
        degenerate,
        extra,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollapsePoint {
    pub n: u64,
    pub median: f64,
}

/// Median of `|n^{1/4}(T_n/n - sigma^2)(sqrt(n) t)|` for each `n`.
pub fn collapse_medians(spec: &SimSpec, ns: &[u64], t: f64, workers: &Workers) -> Result<Vec<CollapsePoint>> {
    let mut out = Vec::with_capacity(ns.len());
    for &n in ns {
        let mut s = spec.clone();
        s.params = s.params.with_n(n)?;
        let nf = n as f64;
        s.horizon = nf.sqrt() * t;
        let q = nf.powf(0.25);
        let vals: Vec<f64> = endpoints(&s, workers)?.into_iter().map(|(_, b)| (q * b.1).abs()).collect();
        out.push(CollapsePoint { n, median: median(&vals) });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    #[test]
    fn clt_small_run() {
        let mut s = SimSpec::new(ModelParams::new(1.0, 1000).unwrap(), 0.1, 1e-2);
        s.replicas = 600;
        s.seed = 3;
        let r = check_clt_increment(&s, &Workers::sequential()).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn clt_degenerate_at_zero() {
        let mut s = SimSpec::new(ModelParams::new(1.0, 100).unwrap(), 0.0, 1e-2);
        s.replicas = 500;
        let r = check_clt_increment(&s, &Workers::sequential()).unwrap();
        assert!(r.degenerate && r.pass);
    }

    #[test]
    fn too_few_replicas() {
        let s = SimSpec::new(ModelParams::new(1.0, 100).unwrap(), 1.0, 1e-2);
        assert!(check_clt_increment(&s, &Workers::sequential()).is_err());
    }
}
