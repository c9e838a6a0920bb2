//! Index-ordered parallel map: results come back in index order whatever
//! the worker count, which keeps every reduction bit-reproducible.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Worker count for `requested`, where 0 means available parallelism.
pub fn worker_count(requested: usize) -> usize {
    if requested > 0 {
        requested
    } else {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
}

/// `(0..count).map(f)` on a pool of `workers` threads.
pub fn map_indexed<T, F>(workers: usize, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(workers))
        .build()
        .map_err(|e| Error::Study {
            study: "pool",
            message: e.to_string(),
        })?;
    Ok(pool.install(|| (0..count).into_par_iter().map(f).collect()))
}
