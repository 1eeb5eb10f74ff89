//! Chunked parallel execution with worker-count invariant results.

use crate::error::{invalid, Result};
use crate::rng::SeededRng;
use rayon::prelude::*;
use std::ops::Range;

/// Splits `0..total` into fixed chunks; chunk `i` draws from stream `i` of
/// the given key, and results come back in chunk order.
#[derive(Debug)]
pub struct Runner {
    pool: rayon::ThreadPool,
    workers: usize,
    chunk_size: usize,
}

impl Runner {
    pub fn new(workers: usize, chunk_size: usize) -> Result<Self> {
        if workers == 0 || chunk_size == 0 {
            return Err(invalid("workers and chunk_size must be >= 1"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
        Ok(Self {
            pool,
            workers,
            chunk_size,
        })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn chunk_size(&self) -> usize {
        self.chunk_size
    }

    pub fn chunks(&self, total: u64) -> Vec<Range<u64>> {
        let size = self.chunk_size as u64;
        (0..total.div_ceil(size))
            .map(|i| i * size..((i + 1) * size).min(total))
            .collect()
    }

    /// Runs `f(range, rng)` on every chunk and returns the outputs in order.
    pub fn map_chunks<T, F>(&self, key: &SeededRng, total: u64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(Range<u64>, &mut SeededRng) -> Result<T> + Sync,
    {
        let chunks = self.chunks(total);
        self.pool.install(|| {
            chunks
                .into_par_iter()
                .enumerate()
                .map(|(i, range)| f(range, &mut key.substream(i as u64)))
                .collect()
        })
    }

    /// [`Runner::map_chunks`] followed by an in-order fold.
    pub fn fold_chunks<T, F, G>(&self, key: &SeededRng, total: u64, init: T, f: F, mut merge: G) -> Result<T>
    where
        T: Send,
        F: Fn(Range<u64>, &mut SeededRng) -> Result<T> + Sync,
        G: FnMut(&mut T, T),
    {
        let mut acc = init;
        for part in self.map_chunks(key, total, f)? {
            merge(&mut acc, part);
        }
        Ok(acc)
    }
}
