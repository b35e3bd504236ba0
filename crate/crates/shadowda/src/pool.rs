//! Rayon-backed `ParMap`.

use rayon::prelude::*;
use shadowda_core::exec::ParMap;

/// A dedicated pool of `jobs` threads (0 picks the rayon default).
pub struct RayonPool {
    pool: rayon::ThreadPool,
}

impl RayonPool {
    pub fn new(jobs: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        Ok(RayonPool { pool: rayon::ThreadPoolBuilder::new().num_threads(jobs).build()? })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl ParMap for RayonPool {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}
