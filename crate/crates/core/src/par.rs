//! Data-parallel helpers with a sequential fallback.
//!
//! Every hot loop in the crate (candidate scoring, field rasterization,
//! per-robot trajectory solves) goes through [`map_range`] so the execution
//! strategy can be picked at runtime. Without the `parallel` feature the
//! parallel mode silently degrades to a plain iterator.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Execution strategy for data-parallel loops.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// True when work will actually be spread over the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Evaluates `f(0..n)` and collects the results in index order.
pub fn map_range<R, F>(exec: Exec, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Maps a slice, preserving order.
pub fn map_slice<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_range(exec, items.len(), |i| f(&items[i]))
}
