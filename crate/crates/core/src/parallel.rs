//! Data-parallel fan-out with deterministic, index-ordered reduction.
//!
//! Batch operations (Monte Carlo paths, stencil assembly, probe sweeps) map
//! an index range through a pure function and then reduce in fixed index
//! order, so results are bit-identical regardless of worker count. With the
//! `parallel` feature disabled everything runs on the calling thread.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `0..n` through `f`, preserving index order in the output.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential reference implementation of [`map_indexed`]; always runs on the
/// calling thread. Kept unconditionally compiled so benchmarks can compare
/// the two under identical inputs.
pub fn map_indexed_serial<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
