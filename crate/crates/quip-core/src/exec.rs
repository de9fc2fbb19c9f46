//! Data-parallel execution helpers.
//!
//! Per-patch and per-sample work in this crate is embarrassingly parallel.
//! With the `parallel` feature (default) these helpers dispatch to rayon;
//! without it they fall back to plain sequential iteration. The runtime
//! override exists so the bench suite can compare both paths in one binary.
//!
//! Reductions that feed gradients or image accumulation are always performed
//! in deterministic order by the callers: work is mapped in parallel, results
//! are combined sequentially in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
#[cfg(feature = "parallel")]
use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
static SEQUENTIAL_OVERRIDE: AtomicBool = AtomicBool::new(false);

/// Forces the sequential path even when built with the `parallel` feature.
pub fn set_sequential_override(sequential: bool) {
    #[cfg(feature = "parallel")]
    SEQUENTIAL_OVERRIDE.store(sequential, Ordering::Relaxed);
    #[cfg(not(feature = "parallel"))]
    let _ = sequential;
}

/// True when work will actually run on rayon.
pub fn parallelism_enabled() -> bool {
    #[cfg(feature = "parallel")]
    {
        !SEQUENTIAL_OVERRIDE.load(Ordering::Relaxed)
    }
    #[cfg(not(feature = "parallel"))]
    {
        false
    }
}

/// Maps `f` over `0..n`, collecting results in index order.
pub fn map_indexed<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallelism_enabled() {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Fallible version of [`map_indexed`]; the first error (by index) wins.
pub fn try_map_indexed<U, E, F>(n: usize, f: F) -> Result<Vec<U>, E>
where
    U: Send,
    E: Send,
    F: Fn(usize) -> Result<U, E> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallelism_enabled() {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Maps `f` over the items of a slice, collecting results in input order.
pub fn map_slice<'a, T, U, F>(items: &'a [T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&'a T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallelism_enabled() {
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}
