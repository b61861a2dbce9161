use perconet_core::TrialRunner;
use rayon::prelude::*;

/// Runs trials on a dedicated rayon pool. Results are collected in trial
/// order, so reductions do not depend on scheduling.
pub struct PoolRunner {
    pool: rayon::ThreadPool,
}

impl PoolRunner {
    /// `workers == 0` uses one thread per available core.
    pub fn new(workers: usize) -> PoolRunner {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool starts");
        PoolRunner { pool }
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl TrialRunner for PoolRunner {
    fn run<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..count).into_par_iter().map(f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_results() {
        let r = PoolRunner::new(4);
        assert_eq!(r.run(100, |i| i * i), (0..100).map(|i| i * i).collect::<Vec<_>>());
    }
}
