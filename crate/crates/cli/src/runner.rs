use branch_exponent_core::mc::ReplicaRunner;
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

/// Replica runner backed by a dedicated rayon pool. Results come back in
/// replica order, so output does not depend on the worker count.
pub struct Parallel {
    pool: ThreadPool,
}

impl Parallel {
    /// `workers == 0` lets rayon pick one thread per core.
    pub fn new(workers: usize) -> Self {
        let pool = ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("failed to start worker threads");
        Self { pool }
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl ReplicaRunner for Parallel {
    fn map<T, F>(&self, reps: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        self.pool
            .install(|| (0..reps as u64).into_par_iter().map(f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use branch_exponent_core::mc::Sequential;

    #[test]
    fn matches_sequential_order() {
        let f = |r: u64| r.wrapping_mul(0x9E37_79B9) ^ (r << 7);
        let par = Parallel::new(4);
        assert_eq!(par.workers(), 4);
        assert_eq!(par.map(1000, f), Sequential.map(1000, f));
    }
}
