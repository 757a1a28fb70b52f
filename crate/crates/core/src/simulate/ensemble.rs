use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream, Stream};

/// Parallelism budget handed down from the caller. Results never depend
/// on it.
#[derive(Debug)]
pub struct Workers {
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
    threads: usize,
}

impl Workers {
    pub fn sequential() -> Self {
        Self {
            #[cfg(feature = "parallel")]
            pool: None,
            threads: 1,
        }
    }

    /// `threads = 0` uses every available core.
    #[cfg(feature = "parallel")]
    pub fn new(threads: usize) -> Result<Self> {
        if threads == 1 {
            return Ok(Self::sequential());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
        let threads = pool.current_num_threads();
        Ok(Self { pool: Some(pool), threads })
    }

    #[cfg(not(feature = "parallel"))]
    pub fn new(_threads: usize) -> Result<Self> {
        Ok(Self::sequential())
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    /// `f(0), ..., f(len-1)` in index order.
    pub fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| (0..len).into_par_iter().map(&f).collect());
        }
        (0..len).map(f).collect()
    }
}

impl Default for Workers {
    fn default() -> Self {
        Self::sequential()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleResult<T> {
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    pub outcomes: Vec<T>,
    pub spec_hash: String,
}

/// Runs `replica(i, rng)` for `i < replicas`, each with its own stream
/// derived from `(master_seed, i)`. Outcomes are in replica order.
pub fn run_ensemble<T, F>(master_seed: u64, replicas: usize, spec_hash: &str, workers: &Workers, replica: F) -> Result<EnsembleResult<T>>
where
    T: Send,
    F: Fn(usize, &mut Stream) -> Result<T> + Sync + Send,
{
    if replicas == 0 {
        return Err(Error::invalid("replicas must be >= 1"));
    }
    let seeds: Vec<u64> = (0..replicas).map(|i| derive_seed(master_seed, i as u64)).collect();
    let outcomes = workers.map(replicas, |i| replica(i, &mut stream(seeds[i])));
    let outcomes = outcomes.into_iter().collect::<Result<Vec<T>>>()?;
    Ok(EnsembleResult { master_seed, seeds, outcomes, spec_hash: spec_hash.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::simulate::{simulate_full, SimSpec};

    fn terminal(spec: &SimSpec, rng: &mut Stream) -> Result<(f64, f64)> {
        Ok(*simulate_full(spec, rng)?.last().unwrap())
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let spec = SimSpec::new(ModelParams::new(1.0, 100).unwrap(), 0.5, 0.01);
        let h = spec.hash();
        let one = run_ensemble(42, 64, &h, &Workers::sequential(), |_, r| terminal(&spec, r)).unwrap();
        let many = run_ensemble(42, 64, &h, &Workers::new(8).unwrap(), |_, r| terminal(&spec, r)).unwrap();
        assert_eq!(one, many);
        let again = run_ensemble(42, 64, &h, &Workers::new(3).unwrap(), |_, r| terminal(&spec, r)).unwrap();
        assert_eq!(one, again);
    }

    #[test]
    fn single_replica_is_direct_run() {
        let spec = SimSpec::new(ModelParams::new(1.0, 10).unwrap(), 0.5, 0.01);
        let e = run_ensemble(7, 1, "", &Workers::sequential(), |_, r| terminal(&spec, r)).unwrap();
        let direct = terminal(&spec, &mut stream(derive_seed(7, 0))).unwrap();
        assert_eq!(e.outcomes[0], direct);
    }
}
