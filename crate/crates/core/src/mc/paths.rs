//! Single root-to-level paths and the level-sum estimator of `E[Z]`.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::exponents::require_finite;
use crate::laws::{ModelSpec, TiltedLaw};
use crate::rng::RandomStream;
use crate::spectral::{RootColour, SpectralCurve};

use super::tree::root_colour;
use super::{
    depth_for_tail, level_sum_tail_bound, mean_and_se, reaches, require_reps, CountResult,
    ReplicaRunner, TAIL_TARGET,
};

/// Samples the log-label sums `S_n` along one path. A single child of a
/// vertex has a uniform colour, so the colour chain after the root is
/// i.i.d. uniform.
#[derive(Debug, Clone, Copy)]
pub struct PathSampler<'a> {
    model: &'a ModelSpec,
    root: RootColour,
}

impl<'a> PathSampler<'a> {
    pub fn new(model: &'a ModelSpec, root: RootColour) -> Self {
        Self { model, root }
    }

    /// Fills `sums[k] = S_k` for `k = 0..=n` and returns the final colour.
    pub fn partial_sums(
        &self,
        n: usize,
        rng: &mut RandomStream,
        sums: &mut Vec<f64>,
    ) -> Result<usize> {
        let d = self.model.d();
        let mut colour = root_colour(self.root, d, rng)?;
        sums.clear();
        sums.push(0.0);
        let mut s = 0.0;
        for _ in 0..n {
            let next = rng.index(d);
            s += self.model.law(colour, next).sample_log(rng);
            sums.push(s);
            colour = next;
        }
        Ok(colour)
    }

    /// Colours `c_0, ..., c_n` of one path, without labels.
    pub fn colour_chain(&self, n: usize, rng: &mut RandomStream) -> Result<Vec<usize>> {
        let d = self.model.d();
        let mut chain = Vec::with_capacity(n + 1);
        chain.push(root_colour(self.root, d, rng)?);
        for _ in 0..n {
            chain.push(rng.index(d));
        }
        Ok(chain)
    }
}

/// Path sampler under the exponential change of measure at `s`: colours
/// move by `Q(j | i) = m_ij v_j / (rho v_i)` and labels are tilted by
/// `xi^s`. The likelihood ratio of a path is
/// `exp(n Lambda(s) - s S_n) v(c_0) / v(c_n)`.
#[derive(Debug, Clone)]
pub struct TiltedPathSampler {
    d: usize,
    s: f64,
    scgf: f64,
    log_v: Vec<f64>,
    transition_cdf: Vec<Vec<f64>>,
    laws: Vec<TiltedLaw>,
    root: RootColour,
}

impl TiltedPathSampler {
    pub fn new(curve: &SpectralCurve, s: f64, root: RootColour) -> Result<Self> {
        let model = curve.model();
        let d = model.d();
        let point = curve.point(s)?;
        let log_v = point.log_right();
        let mut transition_cdf = Vec::with_capacity(d);
        for i in 0..d {
            let logs = (0..d)
                .map(|j| Ok(model.law(i, j).log_moment(s)? + log_v[j]))
                .collect::<Result<Vec<f64>>>()?;
            let top = logs.iter().fold(f64::NEG_INFINITY, |m, l| m.max(*l));
            let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
            let total: f64 = w.iter().sum();
            let mut acc = 0.0;
            let cdf: Vec<f64> = w
                .iter()
                .map(|x| {
                    acc += x / total;
                    acc
                })
                .collect();
            transition_cdf.push(cdf);
        }
        let laws = model
            .laws()
            .map(|(_, law)| law.tilt(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            d,
            s,
            scgf: point.scgf,
            log_v,
            transition_cdf,
            laws,
            root,
        })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// One tilted path of length `n`: `(S_n, log likelihood ratio)`.
    pub fn sample(&self, n: usize, rng: &mut RandomStream) -> Result<(f64, f64)> {
        let start = root_colour(self.root, self.d, rng)?;
        let mut colour = start;
        let mut sum = 0.0;
        for _ in 0..n {
            let u = rng.uniform();
            let cdf = &self.transition_cdf[colour];
            let next = cdf.partition_point(|c| *c <= u).min(self.d - 1);
            sum += self.laws[colour * self.d + next].sample_log(rng);
            colour = next;
        }
        let log_lr = n as f64 * self.scgf - self.s * sum + self.log_v[start] - self.log_v[colour];
        Ok((sum, log_lr))
    }
}

/// Estimates `E[Z(exp(-t))] = sum_n d^n P(S_n >= -t)` on a grid of `t`.
///
/// Each replica draws one path down to a depth whose Chernoff tail is below
/// [`TAIL_TARGET`] at the largest `t`, and contributes
/// `Y_t = sum_n d^n 1{S_n >= -t}` for every `t` at once.
pub fn estimate_ez<R: ReplicaRunner>(
    curve: &SpectralCurve,
    t_grid: &[f64],
    reps: usize,
    root: RootColour,
    seed: u64,
    runner: &R,
) -> Result<Vec<CountResult>> {
    require_finite(curve)?;
    require_reps(reps)?;
    if t_grid.is_empty() || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument(
            "t grid must be non-empty and finite".into(),
        ));
    }
    let t_max = t_grid.iter().fold(f64::NEG_INFINITY, |m, t| m.max(*t));
    let cap = depth_for_tail(curve, t_max, TAIL_TARGET)?;
    let model = curve.model();
    let sampler = PathSampler::new(model, root);
    let d = model.d() as f64;
    let weights: Vec<f64> = (0..=cap).map(|n| d.powi(n as i32)).collect();

    let per_replica = runner.map(reps, |r| -> Result<Vec<f64>> {
        let mut rng = RandomStream::new(seed, r);
        let mut sums = Vec::with_capacity(cap + 1);
        sampler.partial_sums(cap, &mut rng, &mut sums)?;
        Ok(t_grid
            .iter()
            .map(|&t| {
                sums.iter()
                    .zip(&weights)
                    .filter(|(s, _)| reaches(**s, t))
                    .map(|(_, w)| w)
                    .sum()
            })
            .collect())
    });
    let per_replica = super::collect(per_replica)?;

    let mut column = vec![0.0; reps];
    t_grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            for (slot, row) in column.iter_mut().zip(&per_replica) {
                *slot = row[k];
            }
            let (mean, se) = mean_and_se(&column);
            Ok(CountResult {
                t,
                z_value: None,
                ez_estimate: Some(mean),
                std_error: Some(se),
                reps,
                truncation_depth: cap,
                tail_bound: level_sum_tail_bound(curve, t, cap)?.bound,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::LabelLaw;
    use crate::mc::Sequential;
    use crate::numeric::normal_cdf;
    use crate::spectral::level_moment;

    fn gaussian() -> SpectralCurve {
        SpectralCurve::new(ModelSpec::iid(2, LabelLaw::lognormal(-1.5, 1.0).unwrap()).unwrap())
    }

    /// `sum_n 2^n Phi((t - 1.5 n) / sqrt n)`, summed until terms vanish.
    fn gaussian_level_sum(t: f64) -> f64 {
        1.0 + (1..400)
            .map(|n| {
                let n = n as f64;
                2f64.powf(n) * normal_cdf((t - 1.5 * n) / n.sqrt())
            })
            .sum::<f64>()
    }

    #[test]
    fn colour_chain_is_uniform_after_root() {
        let m = ModelSpec::iid(3, LabelLaw::deterministic(0.2).unwrap()).unwrap();
        let sampler = PathSampler::new(&m, RootColour::Fixed(2));
        let mut rng = RandomStream::new(7, 0);
        let mut counts = [[0usize; 3]; 3];
        let draws = 30_000;
        for _ in 0..draws {
            let chain = sampler.colour_chain(2, &mut rng).unwrap();
            assert_eq!(chain[0], 2);
            counts[chain[1]][chain[2]] += 1;
        }
        // chi-square with 8 degrees of freedom; 26.1 is the 0.999 quantile
        let expected = draws as f64 / 9.0;
        let chi2: f64 = counts
            .iter()
            .flatten()
            .map(|c| (*c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 26.1, "{chi2}");
    }

    #[test]
    fn estimate_matches_gaussian_level_sum() {
        let c = gaussian();
        let res = estimate_ez(
            &c,
            &[0.0, 4.0],
            20_000,
            RootColour::Fixed(0),
            11,
            &Sequential,
        )
        .unwrap();
        for r in &res {
            let exact = gaussian_level_sum(r.t);
            let est = r.ez_estimate.unwrap();
            let se = r.std_error.unwrap();
            assert!(
                (est - exact).abs() <= 3.0 * se + 1e-12,
                "t={} est={est} exact={exact} se={se}",
                r.t
            );
            assert!(r.tail_bound <= TAIL_TARGET);
        }
    }

    #[test]
    fn exp_level_moment_matches_paths() {
        let m = ModelSpec::new(vec![
            vec![
                LabelLaw::lognormal(-1.0, 0.5).unwrap(),
                LabelLaw::loguniform(-2.0, -0.5).unwrap(),
            ],
            vec![
                LabelLaw::atomic(vec![0.3, 0.6], vec![0.4, 0.6]).unwrap(),
                LabelLaw::deterministic(0.4).unwrap(),
            ],
        ])
        .unwrap();
        let sampler = PathSampler::new(&m, RootColour::Fixed(1));
        let (s, n) = (0.7, 5);
        let mut rng = RandomStream::new(3, 0);
        let mut sums = Vec::new();
        let vals: Vec<f64> = (0..40_000)
            .map(|_| {
                sampler.partial_sums(n, &mut rng, &mut sums).unwrap();
                (s * sums[n]).exp()
            })
            .collect();
        let (mean, se) = mean_and_se(&vals);
        let exact = level_moment(&m, s, n, RootColour::Fixed(1)).unwrap();
        assert!(
            (mean - exact).abs() <= 3.0 * se,
            "{mean} vs {exact} (se {se})"
        );
    }

    #[test]
    fn tilted_sampler_is_unbiased() {
        // E_Q[exp(log LR) 1{S_n >= n a}] = P(S_n >= n a); Gaussian exact.
        let c = gaussian();
        let (n, a) = (10usize, -1.0);
        let s = 0.5;
        let sampler = TiltedPathSampler::new(&c, s, RootColour::Fixed(0)).unwrap();
        let mut rng = RandomStream::new(5, 0);
        let w: Vec<f64> = (0..40_000)
            .map(|_| {
                let (sum, llr) = sampler.sample(n, &mut rng).unwrap();
                if sum >= n as f64 * a {
                    llr.exp()
                } else {
                    0.0
                }
            })
            .collect();
        let (mean, se) = mean_and_se(&w);
        // S_n ~ N(-1.5 n, n)
        let exact = 1.0 - normal_cdf((n as f64 * a + 1.5 * n as f64) / (n as f64).sqrt());
        assert!(
            (mean - exact).abs() <= 3.0 * se,
            "{mean} vs {exact} (se {se})"
        );
    }

    #[test]
    fn estimates_are_reproducible() {
        let c = gaussian();
        let a = estimate_ez(&c, &[3.0], 500, RootColour::Fixed(0), 9, &Sequential).unwrap();
        let b = estimate_ez(&c, &[3.0], 500, RootColour::Fixed(0), 9, &Sequential).unwrap();
        assert_eq!(a, b);
    }
}
