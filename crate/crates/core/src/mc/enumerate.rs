//! Direct depth-first enumeration of `Z(exp(-t))` on a random tree.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exponents::require_finite;
use crate::rng::RandomStream;
use crate::spectral::{RootColour, SpectralCurve};

use super::tree::root_colour;
use super::{
    level_sum_tail_bound, mean_and_se, reaches, require_reps, CountResult, ReplicaRunner,
    DEFAULT_BUDGET,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumerateOptions {
    pub depth_cap: usize,
    pub root: RootColour,
    /// Maximum number of vertices visited per realisation.
    pub node_cap: u64,
}

impl Default for EnumerateOptions {
    fn default() -> Self {
        Self {
            depth_cap: 64,
            root: RootColour::default(),
            node_cap: DEFAULT_BUDGET,
        }
    }
}

struct Walk {
    count: u64,
    hit_cap: bool,
}

fn walk(
    curve: &SpectralCurve,
    t: f64,
    opts: &EnumerateOptions,
    exact: bool,
    rng: &mut RandomStream,
) -> Result<Walk> {
    let model = curve.model();
    let d = model.d();
    let mut perm = vec![0usize; d];
    let mut stack: Vec<(usize, f64, usize)> = vec![(root_colour(opts.root, d, rng)?, 0.0, 0)];
    let mut visited: u64 = 0;
    let mut count = 0;
    let mut hit_cap = false;
    while let Some((colour, log_value, depth)) = stack.pop() {
        visited += 1;
        if visited > opts.node_cap {
            return Err(Error::MemoryBudgetExceeded {
                requested: visited,
                budget: opts.node_cap,
            });
        }
        if reaches(log_value, t) {
            count += 1;
        } else if exact {
            // labels are a.s. <= 1, so no descendant can recover
            continue;
        }
        if depth == opts.depth_cap {
            hit_cap = true;
            continue;
        }
        rng.permutation(&mut perm);
        for &c in perm.iter() {
            let l = model.law(colour, c).sample_log(rng);
            stack.push((c, log_value + l, depth + 1));
        }
    }
    Ok(Walk { count, hit_cap })
}

fn check_args(curve: &SpectralCurve, t: f64, opts: &EnumerateOptions) -> Result<()> {
    require_finite(curve)?;
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidArgument(alloc::format!(
            "t must be finite and >= 0 (got {t})"
        )));
    }
    if opts.depth_cap == 0 {
        return Err(Error::InvalidArgument(
            "depth cap must be at least 1".into(),
        ));
    }
    Ok(())
}

/// One realisation of `Z(exp(-t))`.
///
/// When every label is certified `<= 1` a subtree is pruned as soon as its
/// running product drops below `exp(-t)`, and the count is exact unless the
/// depth cap is reached. Otherwise the tree is cut at the depth cap and the
/// Chernoff bound on the expected remainder is reported.
pub fn enumerate_z(
    curve: &SpectralCurve,
    t: f64,
    opts: &EnumerateOptions,
    rng: &mut RandomStream,
) -> Result<CountResult> {
    check_args(curve, t, opts)?;
    let exact = curve.model().certified_at_most_one();
    let w = walk(curve, t, opts, exact, rng)?;
    let tail_bound = if exact && !w.hit_cap {
        0.0
    } else {
        level_sum_tail_bound(curve, t, opts.depth_cap)?.bound
    };
    Ok(CountResult {
        t,
        z_value: Some(w.count),
        ez_estimate: None,
        std_error: None,
        reps: 1,
        truncation_depth: opts.depth_cap,
        tail_bound,
    })
}

/// Mean of [`enumerate_z`] over independent trees, one stream per replica.
pub fn enumerate_mean<R: ReplicaRunner>(
    curve: &SpectralCurve,
    t: f64,
    opts: &EnumerateOptions,
    reps: usize,
    seed: u64,
    runner: &R,
) -> Result<CountResult> {
    check_args(curve, t, opts)?;
    require_reps(reps)?;
    let exact = curve.model().certified_at_most_one();
    let walks = super::collect(runner.map(reps, |r| {
        let mut rng = RandomStream::new(seed, r);
        walk(curve, t, opts, exact, &mut rng)
    }))?;
    let counts: Vec<f64> = walks.iter().map(|w| w.count as f64).collect();
    let (mean, se) = mean_and_se(&counts);
    let tail_bound = if exact && !walks.iter().any(|w| w.hit_cap) {
        0.0
    } else {
        level_sum_tail_bound(curve, t, opts.depth_cap)?.bound
    };
    Ok(CountResult {
        t,
        z_value: None,
        ez_estimate: Some(mean),
        std_error: Some(se),
        reps,
        truncation_depth: opts.depth_cap,
        tail_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::{LabelLaw, ModelSpec};
    use crate::mc::Sequential;
    use core::f64::consts::LN_2;

    fn curve(law: LabelLaw) -> SpectralCurve {
        SpectralCurve::new(ModelSpec::iid(2, law).unwrap())
    }

    /// `sum_n 2^n P(Bin(n, 1/2) <= k - n)` with `t = k ln 2`.
    fn binomial_oracle(k: i64) -> f64 {
        let mut total = 0.0;
        for n in 0..=k {
            let mut p = 0.0;
            let mut c = 1.0;
            for m in 0..=n {
                if m > 0 {
                    c = c * (n - m + 1) as f64 / m as f64;
                }
                if m <= k - n {
                    p += c;
                }
            }
            total += p; // 2^n * (c / 2^n)
        }
        total
    }

    #[test]
    fn root_always_counts() {
        let c = curve(LabelLaw::lognormal(-1.5, 1.0).unwrap());
        let mut rng = RandomStream::new(1, 0);
        let opts = EnumerateOptions {
            depth_cap: 8,
            ..Default::default()
        };
        let r = enumerate_z(&c, 0.0, &opts, &mut rng).unwrap();
        assert!(r.z_value.unwrap() >= 1);
        assert!(r.tail_bound > 0.0 && r.tail_bound.is_finite());
    }

    #[test]
    fn deterministic_cascade_is_exact() {
        let c = curve(LabelLaw::deterministic(0.5).unwrap());
        let mut rng = RandomStream::new(1, 0);
        let r = enumerate_z(&c, 3.0 * LN_2, &EnumerateOptions::default(), &mut rng).unwrap();
        assert_eq!(r.z_value, Some(15));
        assert_eq!(r.tail_bound, 0.0);
    }

    #[test]
    fn atomic_mean_matches_binomial_oracle() {
        let c = curve(LabelLaw::atomic(vec![0.25, 0.5], vec![0.5, 0.5]).unwrap());
        let r = enumerate_mean(
            &c,
            5.0 * LN_2,
            &EnumerateOptions::default(),
            10_000,
            3,
            &Sequential,
        )
        .unwrap();
        let exact = binomial_oracle(5);
        let (m, se) = (r.ez_estimate.unwrap(), r.std_error.unwrap());
        assert!((m - exact).abs() <= 3.0 * se, "{m} vs {exact} (se {se})");
        assert_eq!(r.tail_bound, 0.0);
    }

    #[test]
    fn node_cap_is_enforced() {
        let c = curve(LabelLaw::lognormal(-1.5, 1.0).unwrap());
        let mut rng = RandomStream::new(1, 0);
        let opts = EnumerateOptions {
            depth_cap: 30,
            node_cap: 1000,
            ..Default::default()
        };
        assert!(matches!(
            enumerate_z(&c, 1.0, &opts, &mut rng),
            Err(Error::MemoryBudgetExceeded { .. })
        ));
    }

    #[test]
    fn infinite_regime_is_refused() {
        let c = curve(LabelLaw::deterministic(2.0).unwrap());
        let mut rng = RandomStream::new(1, 0);
        assert!(matches!(
            enumerate_z(&c, 1.0, &EnumerateOptions::default(), &mut rng),
            Err(Error::AssumptionViolation(_))
        ));
    }
}
