use std::sync::Arc;

use quasilattice_core::sampling::BatchExecutor;
use rayon::prelude::*;
use rayon::ThreadPool;

/// Runs batches on a rayon pool. Results come back in batch order, so the
/// core's pairwise reduction sees the same sequence at any thread count.
#[derive(Clone, Default)]
pub struct RayonExecutor {
    pool: Option<Arc<ThreadPool>>,
}

impl RayonExecutor {
    /// `None` uses rayon's global pool.
    pub fn new(threads: Option<usize>) -> Result<Self, rayon::ThreadPoolBuildError> {
        let pool = match threads {
            Some(n) => Some(Arc::new(
                rayon::ThreadPoolBuilder::new().num_threads(n).build()?,
            )),
            None => None,
        };
        Ok(Self { pool })
    }
}

impl BatchExecutor for RayonExecutor {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match &self.pool {
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
            None => (0..n).into_par_iter().map(&f).collect(),
        }
    }
}
