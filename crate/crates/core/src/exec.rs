//! Data-parallel execution with a sequential fallback.
//!
//! With the `parallel` feature (default) [`Exec::Parallel`] fans work out on
//! the rayon pool; without it, both modes run sequentially. Reductions always
//! use a fixed chunking of the index range, independent of the number of
//! worker threads, so results are bit-identical across thread counts.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Samples per reduction chunk. Fixed so the floating-point summation tree
/// does not depend on the pool size.
pub const REDUCE_CHUNK: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// `(0..n).map(f)` collected in index order.
    pub fn map_range<O, F>(self, n: usize, f: F) -> Vec<O>
    where
        O: Send,
        F: Fn(usize) -> O + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Ordered fold over `0..n`: indices are accumulated sequentially inside
    /// chunks of [`REDUCE_CHUNK`], then chunk partials are merged left to right.
    pub fn fold_ordered<G, I, A, M>(self, n: usize, init: I, accumulate: A, merge: M) -> Option<G>
    where
        G: Send,
        I: Fn() -> G + Sync + Send,
        A: Fn(&mut G, usize) + Sync + Send,
        M: Fn(&mut G, G),
    {
        let chunks = n.div_ceil(REDUCE_CHUNK);
        let partials = self.map_range(chunks, |c| {
            let mut g = init();
            let end = ((c + 1) * REDUCE_CHUNK).min(n);
            for i in c * REDUCE_CHUNK..end {
                accumulate(&mut g, i);
            }
            g
        });
        let mut it = partials.into_iter();
        let mut total = it.next()?;
        for p in it {
            merge(&mut total, p);
        }
        Some(total)
    }
}
