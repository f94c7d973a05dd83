//! Worker-pool handle passed down from the CLI.
//!
//! All parallel loops in this crate are index-driven maps or max-reductions
//! whose per-index work is a pure function of the index, so results are
//! bit-identical whichever variant executes them. The `parallel` feature
//! (on by default) backs [`Parallelism`] with rayon; without it only the
//! sequential path is compiled.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
#[cfg(feature = "parallel")]
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Clone)]
pub enum Parallelism {
    /// Plain loop on the calling thread.
    Sequential,
    /// Rayon global pool.
    #[cfg(feature = "parallel")]
    Global,
    /// Dedicated rayon pool with a fixed thread count.
    #[cfg(feature = "parallel")]
    Pool(Arc<rayon::ThreadPool>),
}

impl std::fmt::Debug for Parallelism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Parallelism::Sequential => write!(f, "Sequential"),
            #[cfg(feature = "parallel")]
            Parallelism::Global => write!(f, "Global"),
            #[cfg(feature = "parallel")]
            Parallelism::Pool(p) => write!(f, "Pool({})", p.current_num_threads()),
        }
    }
}

impl Parallelism {
    /// Whatever the build offers: the rayon global pool, or sequential
    /// when compiled without the `parallel` feature.
    pub fn auto() -> Self {
        #[cfg(feature = "parallel")]
        {
            Parallelism::Global
        }
        #[cfg(not(feature = "parallel"))]
        {
            Parallelism::Sequential
        }
    }

    /// Fixed thread count; `1` means the sequential path.
    pub fn threads(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("thread count must be >= 1".into()));
        }
        if n == 1 {
            return Ok(Parallelism::Sequential);
        }
        #[cfg(feature = "parallel")]
        {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(Parallelism::Pool(Arc::new(pool)))
        }
        #[cfg(not(feature = "parallel"))]
        {
            Err(Error::InvalidArgument(format!(
                "built without the `parallel` feature; --threads {n} unavailable"
            )))
        }
    }

    /// Map `f` over `0..n`, collecting results in index order.
    pub fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Parallelism::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Parallelism::Global => (0..n).into_par_iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Parallelism::Pool(pool) => {
                pool.install(|| (0..n).into_par_iter().map(f).collect())
            }
        }
    }

    /// Max of `f` over `0..n`. Returns -inf for `n == 0`.
    ///
    /// `f64::max` is order-independent for the finite values used here, so
    /// the reduction is deterministic under any scheduling.
    pub fn max_indexed<F>(&self, n: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        match self {
            Parallelism::Sequential => (0..n).map(f).fold(f64::NEG_INFINITY, f64::max),
            #[cfg(feature = "parallel")]
            Parallelism::Global => (0..n)
                .into_par_iter()
                .with_min_len(8)
                .map(f)
                .reduce(|| f64::NEG_INFINITY, f64::max),
            #[cfg(feature = "parallel")]
            Parallelism::Pool(pool) => pool.install(|| {
                (0..n)
                    .into_par_iter()
                    .with_min_len(8)
                    .map(f)
                    .reduce(|| f64::NEG_INFINITY, f64::max)
            }),
        }
    }

    /// Like [`max_indexed`](Self::max_indexed), but hands each worker a
    /// scratch value built by `init`, so hot loops can reuse buffers.
    /// `f` must not let the scratch contents influence its result.
    pub fn max_indexed_with<S, I, F>(&self, n: usize, init: I, f: F) -> f64
    where
        S: Send,
        I: Fn() -> S + Sync + Send,
        F: Fn(&mut S, usize) -> f64 + Sync + Send,
    {
        match self {
            Parallelism::Sequential => {
                let mut scratch = init();
                (0..n)
                    .map(|i| f(&mut scratch, i))
                    .fold(f64::NEG_INFINITY, f64::max)
            }
            #[cfg(feature = "parallel")]
            Parallelism::Global => (0..n)
                .into_par_iter()
                .with_min_len(8)
                .map_init(init, |scratch, i| f(scratch, i))
                .reduce(|| f64::NEG_INFINITY, f64::max),
            #[cfg(feature = "parallel")]
            Parallelism::Pool(pool) => pool.install(|| {
                (0..n)
                    .into_par_iter()
                    .with_min_len(8)
                    .map_init(&init, |scratch, i| f(scratch, i))
                    .reduce(|| f64::NEG_INFINITY, f64::max)
            }),
        }
    }
}
