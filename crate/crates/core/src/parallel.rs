//! Fixed-size worker pool for independent per-subdomain tasks.
//!
//! Worker `w` runs a contiguous block of task indices and results are
//! returned in task order, so the worker count never changes the output.

use std::num::NonZeroUsize;
use std::thread;

use crate::decomposition::worker_assignment;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WorkerPool {
    workers: usize,
}

impl Default for WorkerPool {
    fn default() -> Self {
        Self::new(thread::available_parallelism().map_or(1, NonZeroUsize::get))
    }
}

impl WorkerPool {
    pub fn new(workers: usize) -> Self {
        Self { workers: workers.max(1) }
    }

    pub fn serial() -> Self {
        Self::new(1)
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Runs `f(i)` for `i in 0..n` and returns the results in index order.
    pub fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync,
    {
        if self.workers == 1 || n <= 1 {
            return (0..n).map(f).collect();
        }
        let blocks = worker_assignment(n, self.workers.min(n));
        let f = &f;
        thread::scope(|scope| {
            let handles: Vec<_> = blocks
                .into_iter()
                .map(|r| scope.spawn(move || r.map(f).collect::<Vec<R>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("worker thread panicked"))
                .collect()
        })
    }

    /// Like [`Self::map`], stopping at the first error in index order.
    pub fn try_map<R, F>(&self, n: usize, f: F) -> Result<Vec<R>>
    where
        R: Send,
        F: Fn(usize) -> Result<R> + Sync,
    {
        self.map(n, f).into_iter().collect()
    }
}
