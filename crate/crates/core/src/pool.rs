//! Bounded worker pool with results merged by task index.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Run `task(i)` for `i in 0..count` on `workers` threads. Results come back
/// in index order, so output never depends on the worker count.
pub fn run_indexed<T, F>(workers: usize, count: usize, task: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    pool.install(|| (0..count).into_par_iter().map(&task).collect())
}
