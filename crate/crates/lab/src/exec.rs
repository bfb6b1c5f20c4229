//! Thread-pool executor for the core kernels.

use mpcorr_core::exec::Executor;
use rayon::prelude::*;

/// Runs `map` on a dedicated rayon pool. Results come back in index order and
/// the core reductions chunk independently of the pool, so the worker count
/// never changes a result.
pub struct Pool {
    pool: rayon::ThreadPool,
}

impl Pool {
    /// `threads = 0` picks the number of available cores.
    pub fn new(threads: usize) -> anyhow::Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        Ok(Self { pool })
    }
}

impl Executor for Pool {
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..len).into_par_iter().map(f).collect())
    }

    fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}
