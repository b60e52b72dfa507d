//! Thread-pool executor for offspring evaluations and replications.

use evorl_core::exec::Executor;
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::error::{LabError, Result};

/// Order-preserving executor backed by a dedicated rayon pool. Results never
/// depend on the number of threads.
pub struct Pool {
    pool: ThreadPool,
}

impl Pool {
    /// `workers == 0` uses every available core.
    pub fn new(workers: usize) -> Result<Self> {
        let pool = ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| LabError::Invalid(format!("cannot start worker pool: {e}")))?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Pool {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync,
    {
        if self.threads() == 1 {
            return items.iter().map(f).collect();
        }
        let f = &f;
        self.pool.install(|| items.par_iter().map(f).collect())
    }
}
