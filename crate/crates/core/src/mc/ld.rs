//! Empirical large-deviation rates `-(1/n) log P(S_n >= n a)`.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;
use crate::rng::RandomStream;
use crate::spectral::{RootColour, SpectralCurve};

use super::{reaches, require_reps, sub_seed, PathSampler, ReplicaRunner, TiltedPathSampler};

/// Fewest events accepted before a rate is reported.
pub const MIN_HITS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LdOptions {
    /// Sample under the exponential tilt at `s0(a)`, the rate-function
    /// maximiser, and reweight by the likelihood ratio.
    pub tilt: bool,
    pub root: RootColour,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LdEstimate {
    pub a: f64,
    pub n: usize,
    pub reps: usize,
    /// Number of replicas on which the event occurred.
    pub hits: u64,
    pub log_probability: f64,
    /// `-(1/n) log P`.
    pub rate: f64,
    /// Delta-method standard error of `rate`.
    pub std_error: f64,
    /// Tilt parameter, when importance sampling was used.
    pub tilt: Option<f64>,
}

/// Estimates `-(1/n) log P(S_n >= n a)` from `reps` independent paths.
pub fn estimate_ld_rate<R: ReplicaRunner>(
    curve: &SpectralCurve,
    a: f64,
    n: usize,
    reps: usize,
    opts: &LdOptions,
    seed: u64,
    runner: &R,
) -> Result<LdEstimate> {
    require_reps(reps)?;
    if n == 0 || !a.is_finite() {
        return Err(Error::InvalidArgument("need n >= 1 and finite a".into()));
    }
    let threshold = -(n as f64) * a;
    let s = if opts.tilt {
        curve.rate_function()?.eval(a)?.s0
    } else {
        0.0
    };

    // log-weight of each replica that hit the event
    let log_weights: Vec<Option<f64>> = if s > 0.0 {
        let sampler = TiltedPathSampler::new(curve, s, opts.root)?;
        super::collect(runner.map(reps, |r| {
            let mut rng = RandomStream::new(seed, r);
            let (sum, llr) = sampler.sample(n, &mut rng)?;
            Ok(reaches(sum, threshold).then_some(llr))
        }))?
    } else {
        let sampler = PathSampler::new(curve.model(), opts.root);
        super::collect(runner.map(reps, |r| {
            let mut rng = RandomStream::new(seed, r);
            let mut sums = Vec::with_capacity(n + 1);
            sampler.partial_sums(n, &mut rng, &mut sums)?;
            Ok(reaches(sums[n], threshold).then_some(0.0))
        }))?
    };

    let hits = log_weights.iter().filter(|w| w.is_some()).count() as u64;
    if hits < MIN_HITS {
        return Err(Error::InsufficientHits {
            hits,
            required: MIN_HITS,
        });
    }
    let ln_reps = (reps as f64).ln();
    let log_p = log_sum_exp(log_weights.iter().flatten().map(|l| (1.0, *l))) - ln_reps;
    let log_m2 = log_sum_exp(log_weights.iter().flatten().map(|l| (1.0, 2.0 * l))) - ln_reps;
    // Var(log p_hat) ~ (E[w^2] / p^2 - 1) / reps
    let rel_var = ((log_m2 - 2.0 * log_p).exp() - 1.0).max(0.0) / reps as f64;
    Ok(LdEstimate {
        a,
        n,
        reps,
        hits,
        log_probability: log_p,
        rate: -log_p / n as f64,
        std_error: rel_var.sqrt() / n as f64,
        tilt: (s > 0.0).then_some(s),
    })
}

/// Doubles the replica count, starting from `initial_reps`, until at least
/// [`MIN_HITS`] events are seen or `max_reps` is exceeded.
#[allow(clippy::too_many_arguments)]
pub fn adaptive_ld_rate<R: ReplicaRunner>(
    curve: &SpectralCurve,
    a: f64,
    n: usize,
    initial_reps: usize,
    max_reps: usize,
    opts: &LdOptions,
    seed: u64,
    runner: &R,
) -> Result<LdEstimate> {
    let mut reps = initial_reps.max(1);
    loop {
        match estimate_ld_rate(curve, a, n, reps, opts, seed, runner) {
            Err(Error::InsufficientHits { .. }) if reps < max_reps => {
                reps = (2 * reps).min(max_reps)
            }
            other => return other,
        }
    }
}

/// Adaptive estimates over a grid of `a`, each with its own seed.
#[allow(clippy::too_many_arguments)]
pub fn ld_grid<R: ReplicaRunner>(
    curve: &SpectralCurve,
    a_grid: &[f64],
    n: usize,
    initial_reps: usize,
    max_reps: usize,
    opts: &LdOptions,
    seed: u64,
    runner: &R,
) -> Vec<Result<LdEstimate>> {
    a_grid
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            adaptive_ld_rate(
                curve,
                a,
                n,
                initial_reps,
                max_reps,
                opts,
                sub_seed(seed, k as u64),
                runner,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::{LabelLaw, ModelSpec};
    use crate::mc::{LatticeWalk, Sequential};
    use crate::numeric::normal_cdf;
    use alloc::vec;
    use core::f64::consts::LN_2;

    fn gaussian() -> SpectralCurve {
        SpectralCurve::new(ModelSpec::iid(2, LabelLaw::lognormal(-1.5, 1.0).unwrap()).unwrap())
    }

    /// `-(1/n) log P(N(-1.5 n, n) >= n a)`.
    fn gaussian_rate(a: f64, n: usize) -> f64 {
        let n = n as f64;
        -(1.0 - normal_cdf((a + 1.5) * n.sqrt())).ln() / n
    }

    #[test]
    fn plain_and_tilted_agree_with_exact_tail() {
        let c = gaussian();
        let (a, n) = (-1.2, 20);
        let exact = gaussian_rate(a, n);
        for tilt in [false, true] {
            let opts = LdOptions {
                tilt,
                ..Default::default()
            };
            let e = estimate_ld_rate(&c, a, n, 20_000, &opts, 1, &Sequential).unwrap();
            assert!(
                (e.rate - exact).abs() <= 3.0 * e.std_error,
                "tilt={tilt}: {} vs {exact} (se {})",
                e.rate,
                e.std_error
            );
            assert_eq!(e.tilt.is_some(), tilt);
        }
    }

    #[test]
    fn rate_vanishes_at_the_mean() {
        let c = gaussian();
        let e =
            estimate_ld_rate(&c, -1.5, 200, 2000, &LdOptions::default(), 2, &Sequential).unwrap();
        assert!(e.rate < 0.01, "{}", e.rate);
        assert_eq!(e.tilt, None);
    }

    #[test]
    fn too_few_hits_is_reported() {
        let c = gaussian();
        assert!(matches!(
            estimate_ld_rate(&c, 0.0, 40, 1000, &LdOptions::default(), 3, &Sequential),
            Err(Error::InsufficientHits { .. })
        ));
        let e = adaptive_ld_rate(
            &c,
            -1.1,
            20,
            100,
            1 << 16,
            &LdOptions::default(),
            3,
            &Sequential,
        )
        .unwrap();
        assert!(e.hits >= MIN_HITS);
    }

    #[test]
    fn atomic_rate_matches_lattice_tail() {
        let c = SpectralCurve::new(
            ModelSpec::iid(
                2,
                LabelLaw::atomic(vec![0.25, 0.5], vec![0.5, 0.5]).unwrap(),
            )
            .unwrap(),
        );
        let (a, n) = (-1.2 * LN_2, 30);
        let p = LatticeWalk::new(c.model())
            .unwrap()
            .tail_at(n, n as f64 * a, RootColour::Fixed(0))
            .unwrap();
        let exact = -p.ln() / n as f64;
        let opts = LdOptions {
            tilt: true,
            ..Default::default()
        };
        let e = estimate_ld_rate(&c, a, n, 20_000, &opts, 4, &Sequential).unwrap();
        assert!(
            (e.rate - exact).abs() <= 3.0 * e.std_error,
            "{} vs {exact} (se {})",
            e.rate,
            e.std_error
        );
    }
}
