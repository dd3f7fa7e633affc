//! Full-population simulation of the colour-typed branching random walk.
//!
//! A particle of colour `i` places its `d` children at distinct colours
//! (uniform permutation) and child `j` jumps by `-log xi`, with `xi` drawn
//! from law `(i, j)`. Positions are therefore `-log zeta[u]`.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::laws::ModelSpec;
use crate::rng::RandomStream;
use crate::spectral::RootColour;

use super::tree::root_colour;
use super::{reaches, require_reps, ReplicaRunner, DEFAULT_BUDGET};

#[derive(Debug, Clone, PartialEq)]
pub struct BrwOptions {
    pub n_max: usize,
    pub reps: usize,
    /// Levels `t` for the counts `#{X <= t}`.
    pub t_grid: Vec<f64>,
    pub root: RootColour,
    /// Upper bound on `d^n_max * reps`.
    pub budget: u64,
}

impl Default for BrwOptions {
    fn default() -> Self {
        Self {
            n_max: 10,
            reps: 10,
            t_grid: Vec::new(),
            root: RootColour::default(),
            budget: DEFAULT_BUDGET,
        }
    }
}

/// Summary of generation `n`, averaged over replicas.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BrwSnapshot {
    pub generation: usize,
    pub reps: usize,
    /// Particles per replica, `d^n`.
    pub particles: u64,
    pub min_mean: f64,
    pub min_std_error: f64,
    /// Smallest position seen in any replica.
    pub min_overall: f64,
    /// Replica-averaged 10%, 50% and 90% position quantiles.
    pub quantiles: [f64; 3],
    /// Mean of `#{X <= t}` at this generation, one entry per `t`.
    pub counts_le: Vec<f64>,
    /// Mean of `sum_{k <= n} #{X^(k) <= t}`.
    pub occupation: Vec<f64>,
}

struct GenerationStats {
    min: f64,
    quantiles: [f64; 3],
    counts_le: Vec<u64>,
}

const QUANTILE_LEVELS: [f64; 3] = [0.1, 0.5, 0.9];

fn stats(positions: &[f64], scratch: &mut Vec<f64>, t_grid: &[f64]) -> GenerationStats {
    let min = positions.iter().fold(f64::INFINITY, |m, x| m.min(*x));
    scratch.clear();
    scratch.extend_from_slice(positions);
    let last = scratch.len() - 1;
    let quantiles = QUANTILE_LEVELS.map(|q| {
        let k = (q * last as f64).floor() as usize;
        *scratch.select_nth_unstable_by(k, f64::total_cmp).1
    });
    // `X <= t` is `zeta >= exp(-t)` with `zeta = exp(-X)`
    let counts_le = t_grid
        .iter()
        .map(|&t| positions.iter().filter(|x| reaches(-**x, t)).count() as u64)
        .collect();
    GenerationStats {
        min,
        quantiles,
        counts_le,
    }
}

fn replica(
    model: &ModelSpec,
    opts: &BrwOptions,
    rng: &mut RandomStream,
) -> Result<Vec<GenerationStats>> {
    let d = model.d();
    let mut positions = vec![0.0];
    let mut colours = vec![root_colour(opts.root, d, rng)? as u32];
    let mut scratch = Vec::new();
    let mut perm = vec![0usize; d];
    let mut out = Vec::with_capacity(opts.n_max + 1);
    out.push(stats(&positions, &mut scratch, &opts.t_grid));
    for _ in 0..opts.n_max {
        let mut next_pos = Vec::with_capacity(positions.len() * d);
        let mut next_col = Vec::with_capacity(positions.len() * d);
        for (&x, &c) in positions.iter().zip(&colours) {
            rng.permutation(&mut perm);
            for &j in perm.iter() {
                next_pos.push(x - model.law(c as usize, j).sample_log(rng));
                next_col.push(j as u32);
            }
        }
        positions = next_pos;
        colours = next_col;
        out.push(stats(&positions, &mut scratch, &opts.t_grid));
    }
    Ok(out)
}

/// Simulates `reps` independent populations up to generation `n_max`.
/// Refuses runs with `d^n_max * reps` above the budget.
pub fn simulate_brw<R: ReplicaRunner>(
    model: &ModelSpec,
    opts: &BrwOptions,
    seed: u64,
    runner: &R,
) -> Result<Vec<BrwSnapshot>> {
    require_reps(opts.reps)?;
    let d = model.d() as u64;
    let requested = u32::try_from(opts.n_max)
        .ok()
        .and_then(|n| d.checked_pow(n))
        .and_then(|p| p.checked_mul(opts.reps as u64))
        .unwrap_or(u64::MAX);
    if requested > opts.budget {
        return Err(Error::MemoryBudgetExceeded {
            requested,
            budget: opts.budget,
        });
    }
    let runs = super::collect(runner.map(opts.reps, |r| {
        let mut rng = RandomStream::new(seed, r);
        replica(model, opts, &mut rng)
    }))?;

    let reps = opts.reps as f64;
    let k = opts.t_grid.len();
    let mut occupation = vec![0.0; k];
    let mut snapshots = Vec::with_capacity(opts.n_max + 1);
    for n in 0..=opts.n_max {
        let mins: Vec<f64> = runs.iter().map(|run| run[n].min).collect();
        let (min_mean, min_std_error) = super::mean_and_se(&mins);
        let min_overall = mins.iter().fold(f64::INFINITY, |m, x| m.min(*x));
        let quantiles =
            [0, 1, 2].map(|q| runs.iter().map(|run| run[n].quantiles[q]).sum::<f64>() / reps);
        let counts_le: Vec<f64> = (0..k)
            .map(|i| {
                runs.iter()
                    .map(|run| run[n].counts_le[i] as f64)
                    .sum::<f64>()
                    / reps
            })
            .collect();
        for (acc, c) in occupation.iter_mut().zip(&counts_le) {
            *acc += c;
        }
        snapshots.push(BrwSnapshot {
            generation: n,
            reps: opts.reps,
            particles: d.pow(n as u32),
            min_mean,
            min_std_error: if opts.reps > 1 {
                min_std_error
            } else {
                f64::NAN
            },
            min_overall,
            quantiles,
            counts_le,
            occupation: occupation.clone(),
        });
    }
    Ok(snapshots)
}
