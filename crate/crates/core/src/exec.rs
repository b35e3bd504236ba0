//! Pluggable map-over-indices so callers can supply a thread pool.

use alloc::vec::Vec;

/// Evaluate `f(0..n)` and return results in index order. Implementations
/// may run items concurrently but must not change the results.
pub trait ParMap: Sync {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl ParMap for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
