//! Worker-pool control. Every solver kernel is a row-parallel map that reads
//! an immutable previous state; reductions are folded row by row in a fixed
//! order, so results do not depend on the number of workers.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Environment variable that overrides any requested worker count.
pub const THREADS_ENV: &str = "SLIDESURGE_THREADS";

#[derive(Debug)]
pub struct Workers {
    pool: rayon::ThreadPool,
}

impl Workers {
    /// A pool with `threads` workers; `None` lets rayon pick.
    pub fn new(threads: Option<usize>) -> Result<Self> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            if n == 0 {
                return Err(Error::Config("thread count must be at least 1".into()));
            }
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        Ok(Self { pool })
    }

    /// Resolves the worker count from the environment first, then `requested`.
    pub fn from_env_or(requested: Option<usize>) -> Result<Self> {
        match std::env::var(THREADS_ENV) {
            Ok(v) => {
                let n = v
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
                Self::new(Some(n))
            }
            Err(_) => Self::new(requested),
        }
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }
}

/// Fills `out` row by row in parallel.
pub(crate) fn map_rows<O, F>(out: &mut [O], nx: usize, f: F)
where
    O: Send,
    F: Fn(usize, &mut [O]) + Sync,
{
    out.par_chunks_mut(nx).enumerate().for_each(|(j, row)| f(j, row));
}

/// Per-row partial results, collected in row order.
pub(crate) fn per_row<R, F>(ny: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..ny).into_par_iter().map(f).collect()
}
