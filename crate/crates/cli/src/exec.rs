use mvactive_core::campaign::Executor;
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuildError, ThreadPoolBuilder};

/// Runs per-frame jobs on a rayon pool. Output order matches input order, so
/// results do not depend on the thread count.
pub struct Rayon {
    pool: ThreadPool,
}

impl Rayon {
    /// `threads = 0` lets rayon pick.
    pub fn new(threads: usize) -> Result<Self, ThreadPoolBuildError> {
        Ok(Self { pool: ThreadPoolBuilder::new().num_threads(threads).build()? })
    }
}

impl Executor for Rayon {
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..len).into_par_iter().map(f).collect())
    }
}
