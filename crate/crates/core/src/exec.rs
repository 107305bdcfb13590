//! Pluggable execution of independent, indexed jobs.

use alloc::vec::Vec;

/// Runs `f(0), …, f(n-1)` and returns the results in index order.
///
/// Implementations may evaluate jobs concurrently, but the returned vector
/// must always be ordered by index so callers can merge deterministically.
pub trait Executor {
    fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs every job on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
