//! Monte Carlo estimators and exact oracles for `Z(exp(-t))`.
//!
//! Every stochastic routine takes a master seed and derives one
//! [`RandomStream`](crate::RandomStream) per replica, so results do not
//! depend on how a [`ReplicaRunner`] schedules the work.

mod brw;
mod enumerate;
mod lattice;
mod ld;
mod paths;
mod tail;
mod tree;

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};

pub use brw::{simulate_brw, BrwOptions, BrwSnapshot};
pub use enumerate::{enumerate_mean, enumerate_z, EnumerateOptions};
pub use lattice::{lattice_dp_ez, LatticeSum, LatticeWalk};
pub use ld::{adaptive_ld_rate, estimate_ld_rate, ld_grid, LdEstimate, LdOptions, MIN_HITS};
pub use paths::{estimate_ez, PathSampler, TiltedPathSampler};
pub use tail::{depth_for_tail, level_sum_tail_bound, TailBound};
pub use tree::{grow_colored_tree, tree_size, ColoredTree};

/// Default particle-step / node budget.
pub const DEFAULT_BUDGET: u64 = 100_000_000;
/// Target for the certified truncation tail of level sums.
pub const TAIL_TARGET: f64 = 1e-12;
/// Relative slack on threshold comparisons, so that `2^-3 >= 2^-3` survives
/// rounding of summed logs.
pub const THRESHOLD_SLACK: f64 = 1e-9;

/// `log_value >= -t`, up to [`THRESHOLD_SLACK`].
#[inline]
pub fn reaches(log_value: f64, t: f64) -> bool {
    log_value >= -t - THRESHOLD_SLACK * (1.0 + t.abs())
}

/// Maps a function over replica indices `0..reps`, returning results in
/// index order.
pub trait ReplicaRunner {
    fn map<T, F>(&self, reps: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl ReplicaRunner for Sequential {
    fn map<T, F>(&self, reps: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        (0..reps as u64).map(f).collect()
    }
}

/// One row of a count experiment: either a single realisation of
/// `Z(exp(-t))` or an estimate of its mean.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CountResult {
    pub t: f64,
    pub z_value: Option<u64>,
    pub ez_estimate: Option<f64>,
    pub std_error: Option<f64>,
    pub reps: usize,
    pub truncation_depth: usize,
    /// Bound on the expected count beyond `truncation_depth`; zero when
    /// the count is exact.
    pub tail_bound: f64,
}

/// Sample mean and its standard error.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub(crate) fn require_reps(reps: usize) -> Result<()> {
    if reps == 0 {
        Err(Error::InvalidArgument("reps must be at least 1".into()))
    } else {
        Ok(())
    }
}

pub(crate) fn collect<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

/// Seed for the `k`-th independent sub-experiment of a sweep.
pub fn sub_seed(seed: u64, k: u64) -> u64 {
    seed ^ (k + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}
