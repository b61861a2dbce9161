//! Trial scheduling abstraction.
//!
//! The core never spawns threads. Callers hand in a [`TrialRunner`]; the
//! `perconet` crate provides a thread-pool implementation. Results always come
//! back ordered by trial index, so reductions over them are order-fixed.

use alloc::vec::Vec;

pub trait TrialRunner: Sync {
    fn run<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs trials one after another on the calling thread.
#[derive(Debug, Default, Clone, Copy)]
pub struct Sequential;

impl TrialRunner for Sequential {
    fn run<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..count).map(f).collect()
    }
}

impl<R: TrialRunner> TrialRunner for &R {
    fn run<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (**self).run(count, f)
    }
}
