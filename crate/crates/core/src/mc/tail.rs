//! Chernoff bounds on the level sum beyond a truncation depth.
//!
//! With `v` the right Perron vector of `m(s)` and `kappa = max v / min v`,
//! `d^n P(S_n >= -t) <= exp(s t) kappa rho(s)^n` for every `s` with
//! `rho(s) < 1`. Summing the geometric tail and minimising over `s` in the
//! sub-unit window gives the bound.

use crate::error::Result;
use crate::exponents::unit_roots;
use crate::numeric::golden_min;
use crate::spectral::{with_errors, SpectralCurve, S_MAX, S_TOL};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBound {
    /// Bound on `sum_{n > cap} d^n P(S_n >= -t)`.
    pub bound: f64,
    /// Chernoff parameter attaining it.
    pub s: f64,
}

fn window(curve: &SpectralCurve) -> Result<(f64, f64)> {
    let (s1, s2) = unit_roots(curve)?;
    Ok((s1, s2.unwrap_or(S_MAX)))
}

fn log_tail(curve: &SpectralCurve, t: f64, cap: usize, s: f64) -> Result<f64> {
    let p = curve.point(s)?;
    if p.log_rho >= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(s * t + p.log_right_spread() + (cap + 1) as f64 * p.log_rho - (-p.log_rho.exp_m1()).ln())
}

/// Requires the finite regime.
pub fn level_sum_tail_bound(curve: &SpectralCurve, t: f64, cap: usize) -> Result<TailBound> {
    let (lo, hi) = window(curve)?;
    let best = with_errors(f64::INFINITY, |sink| {
        golden_min(|s| sink(log_tail(curve, t, cap, s)), lo, hi, S_TOL)
    })?;
    Ok(TailBound {
        bound: best.value.exp(),
        s: best.x,
    })
}

/// Smallest depth whose tail bound at `t` is at most `target`.
pub fn depth_for_tail(curve: &SpectralCurve, t: f64, target: f64) -> Result<usize> {
    let (lo, hi) = window(curve)?;
    // Real-valued cap solving the bound = target at fixed s.
    let cap_at = |s: f64| -> Result<f64> {
        let p = curve.point(s)?;
        if p.log_rho >= 0.0 {
            return Ok(f64::INFINITY);
        }
        let numer = target.ln() - s * t - p.log_right_spread() + (-p.log_rho.exp_m1()).ln();
        Ok(numer / p.log_rho - 1.0)
    };
    let best = with_errors(f64::INFINITY, |sink| {
        golden_min(|s| sink(cap_at(s)), lo, hi, S_TOL)
    })?;
    let mut cap = best.value.max(0.0).ceil() as usize;
    while level_sum_tail_bound(curve, t, cap)?.bound > target {
        cap += 1;
    }
    Ok(cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::{LabelLaw, ModelSpec};

    fn gaussian() -> SpectralCurve {
        SpectralCurve::new(ModelSpec::iid(2, LabelLaw::lognormal(-1.5, 1.0).unwrap()).unwrap())
    }

    #[test]
    fn bound_dominates_gaussian_tail() {
        // Exact terms are 2^n Phi((t - 1.5 n) / sqrt n).
        let c = gaussian();
        let t = 10.0;
        let cap = 30;
        let exact: f64 = (cap + 1..400)
            .map(|n| {
                let n = n as f64;
                2f64.powf(n) * crate::numeric::normal_cdf((t - 1.5 * n) / n.sqrt())
            })
            .sum();
        let b = level_sum_tail_bound(&c, t, cap).unwrap();
        assert!(b.bound >= exact, "{} < {}", b.bound, exact);
        // Chernoff loses only a polynomial prefactor here
        assert!(b.bound < 100.0 * exact, "{} vs {}", b.bound, exact);
    }

    #[test]
    fn depth_meets_target() {
        let c = gaussian();
        let cap = depth_for_tail(&c, 25.0, 1e-12).unwrap();
        assert!(level_sum_tail_bound(&c, 25.0, cap).unwrap().bound <= 1e-12);
        assert!(level_sum_tail_bound(&c, 25.0, cap - 5).unwrap().bound > 1e-12);
        assert!(cap > 100 && cap < 250, "{cap}");
    }

    #[test]
    fn infinite_regime_is_refused() {
        let c =
            SpectralCurve::new(ModelSpec::iid(2, LabelLaw::deterministic(2.0).unwrap()).unwrap());
        assert!(level_sum_tail_bound(&c, 1.0, 10).is_err());
    }
}
