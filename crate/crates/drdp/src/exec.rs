use drdp_core::simulate::{Sequential, TrialExecutor};
use rayon::prelude::*;

/// Runs trials on a dedicated rayon pool. Results are collected by trial
/// index, so output does not depend on the worker count.
pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    /// `workers == 0` lets rayon pick the number of threads.
    pub fn new(workers: usize) -> Self {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool");
        Self { pool }
    }
}

impl TrialExecutor for Parallel {
    fn run(&self, trials: usize, f: &(dyn Fn(usize) -> f64 + Sync)) -> Vec<f64> {
        self.pool
            .install(|| (0..trials).into_par_iter().map(f).collect())
    }
}

/// One worker means no pool at all.
pub fn executor(workers: usize) -> Box<dyn TrialExecutor + Sync> {
    if workers == 1 {
        Box::new(Sequential)
    } else {
        Box::new(Parallel::new(workers))
    }
}
