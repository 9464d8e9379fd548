//! Thread-pool executor.

use gsa2_core::Executor;
use rayon::prelude::*;

use crate::error::{AppError, Result};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "GSA2_WORKERS";

/// Runs [`Executor::map`] items on a dedicated rayon pool. Results come back
/// in index order, so output never depends on the worker count.
#[derive(Debug)]
pub struct PoolExecutor {
    pool: rayon::ThreadPool,
}

impl PoolExecutor {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(AppError::config("workers", "worker count must be at least 1"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| AppError::config("workers", e.to_string()))?;
        Ok(PoolExecutor { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for PoolExecutor {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        if n <= 1 || self.workers() == 1 {
            return (0..n).map(f).collect();
        }
        self.pool.install(|| (0..n).into_par_iter().map(&f).collect())
    }
}

/// Worker count: the flag if given, else `GSA2_WORKERS`, else the config
/// value, else the number of available cores.
pub fn resolve_workers(flag: Option<usize>, config: Option<usize>) -> Result<usize> {
    if let Some(w) = flag {
        return Ok(w);
    }
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        return v
            .trim()
            .parse()
            .map_err(|_| AppError::config(WORKERS_ENV, format!("not a worker count: {v:?}")));
    }
    if let Some(w) = config {
        return Ok(w);
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_keep_index_order() {
        let ex = PoolExecutor::new(3).unwrap();
        assert_eq!(ex.map(100, |i| i * i), (0..100).map(|i| i * i).collect::<Vec<_>>());
        assert!(PoolExecutor::new(0).is_err());
    }

    #[test]
    fn flag_wins() {
        assert_eq!(resolve_workers(Some(5), Some(2)).unwrap(), 5);
    }
}
