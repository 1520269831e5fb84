//! How independent work items are scheduled.

use alloc::vec::Vec;

/// Runs `f(0), f(1), ..., f(n - 1)` and returns the results in index order.
///
/// Implementations may evaluate items concurrently but must not change the
/// result: every stochastic routine in this crate derives its randomness
/// from the item index, never from shared state.
pub trait Executor: Sync {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Evaluates items one after another on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
