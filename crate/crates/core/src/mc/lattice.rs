//! Exact level sums for lattice-valued label logs by dynamic programming
//! over (colour, lattice position).

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::exponents::require_finite;
use crate::laws::ModelSpec;
use crate::spectral::{RootColour, SpectralCurve};

use super::{depth_for_tail, level_sum_tail_bound, reaches, TAIL_TARGET};

const MAX_DENOMINATOR: u32 = 64;
const INTEGRALITY_TOL: f64 = 1e-9;

/// Colour-typed random walk `S_n / delta` on the integers.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeWalk {
    d: usize,
    delta: f64,
    /// Integer steps and probabilities for each `(parent, child)` pair.
    steps: Vec<Vec<(i64, f64)>>,
    k_min: i64,
    k_max: i64,
}

/// Distribution of `S_n / delta` summed over end colours, starting at
/// integer position `lo`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeLaw {
    pub lo: i64,
    pub probs: Vec<f64>,
}

impl LatticeWalk {
    /// Fails with [`Error::NotLattice`] unless every label is atomic or
    /// deterministic with logs on a common lattice `delta Z`, where `delta`
    /// is the smallest nonzero `|log|` divided by some `q <= 64`.
    pub fn new(model: &ModelSpec) -> Result<Self> {
        let d = model.d();
        let mut atoms = Vec::with_capacity(d * d);
        for (_, law) in model.laws() {
            atoms.push(law.lattice_atoms().ok_or(Error::NotLattice)?);
        }
        let base = atoms
            .iter()
            .flat_map(|(logs, probs)| logs.iter().zip(probs))
            .filter(|(l, p)| **p > 0.0 && **l != 0.0)
            .fold(f64::INFINITY, |m, (l, _)| m.min(l.abs()));
        let delta = if base.is_finite() {
            (1..=MAX_DENOMINATOR)
                .map(|q| base / q as f64)
                .find(|delta| {
                    atoms.iter().all(|(logs, _)| {
                        logs.iter().all(|l| {
                            let r = l / delta;
                            (r - r.round()).abs() <= INTEGRALITY_TOL * r.abs().max(1.0)
                        })
                    })
                })
                .ok_or(Error::NotLattice)?
        } else {
            1.0
        };
        let steps: Vec<Vec<(i64, f64)>> = atoms
            .iter()
            .map(|(logs, probs)| {
                logs.iter()
                    .zip(probs)
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(l, p)| ((l / delta).round() as i64, *p))
                    .collect()
            })
            .collect();
        let k_min = steps.iter().flatten().map(|s| s.0).min().unwrap_or(0);
        let k_max = steps.iter().flatten().map(|s| s.0).max().unwrap_or(0);
        Ok(Self {
            d,
            delta,
            steps,
            k_min,
            k_max,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    fn initial(&self, root: RootColour) -> Result<Vec<Vec<f64>>> {
        let mut dist = vec![vec![0.0]; self.d];
        match root {
            RootColour::Fixed(c) if c < self.d => dist[c][0] = 1.0,
            RootColour::Fixed(c) => {
                return Err(Error::InvalidArgument(alloc::format!(
                    "root colour {c} out of range for d = {}",
                    self.d
                )))
            }
            RootColour::Uniform => dist.iter_mut().for_each(|v| v[0] = 1.0 / self.d as f64),
        }
        Ok(dist)
    }

    /// One generation: the next colour is uniform, the step law depends on
    /// the (parent, child) colour pair.
    fn step(&self, lo: i64, dist: &[Vec<f64>]) -> (i64, Vec<Vec<f64>>) {
        let len = dist[0].len();
        let new_lo = lo + self.k_min;
        let new_len = len + (self.k_max - self.k_min) as usize;
        let mut next = vec![vec![0.0; new_len]; self.d];
        let w = 1.0 / self.d as f64;
        for (i, from) in dist.iter().enumerate() {
            for (j, to) in next.iter_mut().enumerate() {
                for &(k, p) in &self.steps[i * self.d + j] {
                    let offset = (k - self.k_min) as usize;
                    let wp = w * p;
                    for (x, mass) in from.iter().enumerate() {
                        if *mass != 0.0 {
                            to[x + offset] += wp * mass;
                        }
                    }
                }
            }
        }
        (new_lo, next)
    }

    /// `P(S_n >= -t)` for `n = 0..=n_max`.
    pub fn tail_probabilities(&self, t: f64, n_max: usize, root: RootColour) -> Result<Vec<f64>> {
        let mut dist = self.initial(root)?;
        let mut lo = 0i64;
        let absorbing = self.k_max <= 0;
        let tail = |lo: i64, dist: &[Vec<f64>]| -> f64 {
            dist.iter()
                .map(|v| {
                    v.iter()
                        .enumerate()
                        .filter(|(x, _)| reaches((lo + *x as i64) as f64 * self.delta, t))
                        .map(|(_, p)| p)
                        .sum::<f64>()
                })
                .sum()
        };
        let mut out = Vec::with_capacity(n_max + 1);
        out.push(tail(lo, &dist));
        for _ in 0..n_max {
            let (new_lo, next) = self.step(lo, &dist);
            lo = new_lo;
            dist = next;
            if absorbing {
                // steps never increase the position, so mass below the
                // threshold is gone for good
                let first = (0..dist[0].len())
                    .find(|x| reaches((lo + *x as i64) as f64 * self.delta, t))
                    .unwrap_or(dist[0].len());
                for v in dist.iter_mut() {
                    v.drain(..first);
                    if v.is_empty() {
                        v.push(0.0);
                    }
                }
                lo += first as i64;
            }
            out.push(tail(lo, &dist));
        }
        Ok(out)
    }

    /// Full law of `S_n / delta`.
    pub fn distribution(&self, n: usize, root: RootColour) -> Result<LatticeLaw> {
        let mut dist = self.initial(root)?;
        let mut lo = 0i64;
        for _ in 0..n {
            let (new_lo, next) = self.step(lo, &dist);
            lo = new_lo;
            dist = next;
        }
        let mut probs = vec![0.0; dist[0].len()];
        for v in &dist {
            for (acc, p) in probs.iter_mut().zip(v) {
                *acc += p;
            }
        }
        Ok(LatticeLaw { lo, probs })
    }

    /// `P(S_n >= x)`.
    pub fn tail_at(&self, n: usize, x: f64, root: RootColour) -> Result<f64> {
        let law = self.distribution(n, root)?;
        Ok(law
            .probs
            .iter()
            .enumerate()
            .filter(|(k, _)| reaches((law.lo + *k as i64) as f64 * self.delta, -x))
            .map(|(_, p)| p)
            .sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LatticeSum {
    pub t: f64,
    /// `sum_{n <= n_max} d^n P(S_n >= -t)`.
    pub value: f64,
    pub n_max: usize,
    pub tail_bound: f64,
}

/// Exact `E[Z(exp(-t))]` up to a certified tail. When `n_max` is `None` the
/// depth is chosen so the tail is below `1e-12`.
pub fn lattice_dp_ez(
    curve: &SpectralCurve,
    t: f64,
    n_max: Option<usize>,
    root: RootColour,
) -> Result<LatticeSum> {
    require_finite(curve)?;
    let walk = LatticeWalk::new(curve.model())?;
    let n_max = match n_max {
        Some(n) => n,
        None => depth_for_tail(curve, t, TAIL_TARGET)?,
    };
    let d = curve.d() as f64;
    let value = walk
        .tail_probabilities(t, n_max, root)?
        .iter()
        .enumerate()
        .map(|(n, p)| d.powi(n as i32) * p)
        .sum();
    Ok(LatticeSum {
        t,
        value,
        n_max,
        tail_bound: level_sum_tail_bound(curve, t, n_max)?.bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::LabelLaw;
    use core::f64::consts::LN_2;

    fn atomic_curve() -> SpectralCurve {
        SpectralCurve::new(
            ModelSpec::iid(
                2,
                LabelLaw::atomic(vec![0.25, 0.5], vec![0.5, 0.5]).unwrap(),
            )
            .unwrap(),
        )
    }

    fn binomial_cdf(n: u64, k: i64) -> f64 {
        if k < 0 {
            return 0.0;
        }
        let mut c = 1.0;
        let mut p = 0.0;
        for m in 0..=n {
            if m > 0 {
                c = c * (n - m + 1) as f64 / m as f64;
            }
            if (m as i64) <= k {
                p += c;
            }
        }
        p / 2f64.powi(n as i32)
    }

    #[test]
    fn lattice_detection() {
        let w = LatticeWalk::new(atomic_curve().model()).unwrap();
        assert!((w.delta() - LN_2).abs() < 1e-15);
        let m = ModelSpec::iid(
            2,
            LabelLaw::atomic_from_logs(vec![-1.5, -1.0], vec![0.5, 0.5]).unwrap(),
        )
        .unwrap();
        assert!((LatticeWalk::new(&m).unwrap().delta() - 0.5).abs() < 1e-15);
        let m = ModelSpec::iid(
            2,
            LabelLaw::atomic_from_logs(vec![-1.0, -core::f64::consts::PI], vec![0.5, 0.5]).unwrap(),
        )
        .unwrap();
        assert_eq!(LatticeWalk::new(&m), Err(Error::NotLattice));
        let m = ModelSpec::iid(2, LabelLaw::lognormal(-1.0, 1.0).unwrap()).unwrap();
        assert_eq!(LatticeWalk::new(&m), Err(Error::NotLattice));
    }

    #[test]
    fn binomial_tails() {
        let w = LatticeWalk::new(atomic_curve().model()).unwrap();
        let t = 9.0 * LN_2;
        let probs = w.tail_probabilities(t, 12, RootColour::Fixed(0)).unwrap();
        for (n, p) in probs.iter().enumerate() {
            let exact = binomial_cdf(n as u64, 9 - n as i64);
            assert!((p - exact).abs() < 1e-15, "n={n}: {p} vs {exact}");
        }
        let x = -1.2 * LN_2 * 30.0;
        let p = w.tail_at(30, x, RootColour::Uniform).unwrap();
        // S_n = -(n + m) ln 2 >= -36 ln 2  <=>  m <= 6
        assert!((p - binomial_cdf(30, 6)).abs() < 1e-15);
    }

    #[test]
    fn level_sum_at_zero_is_one() {
        let r = lattice_dp_ez(&atomic_curve(), 0.0, None, RootColour::Fixed(0)).unwrap();
        assert!((r.value - 1.0).abs() < 1e-15);
        assert!(r.tail_bound <= 1e-12);
    }

    #[test]
    fn level_sum_matches_binomial_formula() {
        let r = lattice_dp_ez(&atomic_curve(), 5.0 * LN_2, None, RootColour::Fixed(0)).unwrap();
        let exact: f64 = (0..=5)
            .map(|n| 2f64.powi(n) * binomial_cdf(n as u64, 5 - n as i64))
            .sum();
        assert!((r.value - exact).abs() < 1e-12, "{} vs {exact}", r.value);
    }

    #[test]
    fn colour_dependent_walk_conserves_mass() {
        let m = ModelSpec::new(vec![
            vec![
                LabelLaw::atomic_from_logs(vec![-0.5, 0.5], vec![0.3, 0.7]).unwrap(),
                LabelLaw::deterministic_from_log(-1.0).unwrap(),
            ],
            vec![
                LabelLaw::atomic_from_logs(vec![-1.5], vec![1.0]).unwrap(),
                LabelLaw::atomic_from_logs(vec![-2.0, 0.0], vec![0.5, 0.5]).unwrap(),
            ],
        ])
        .unwrap();
        let w = LatticeWalk::new(&m).unwrap();
        let law = w.distribution(7, RootColour::Uniform).unwrap();
        assert!((law.probs.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        // mean of S_7 from the colour chain: root uniform, then uniform
        let mean_step = (0.5 * (0.7 * 0.5 - 0.3 * 0.5) - 0.5 - 0.75 - 0.5) / 2.0;
        let mean: f64 = law
            .probs
            .iter()
            .enumerate()
            .map(|(k, p)| (law.lo + k as i64) as f64 * w.delta() * p)
            .sum();
        assert!((mean - 7.0 * mean_step).abs() < 1e-12, "{mean}");
    }
}
