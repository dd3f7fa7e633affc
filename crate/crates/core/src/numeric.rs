//! Scalar root finding, golden-section search and a few special functions.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

/// Reciprocal golden ratio, `(sqrt(5) - 1) / 2`.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub x: f64,
    pub value: f64,
}

/// Golden-section minimisation of `f` on `[a, b]`, stopping once the bracket
/// is narrower than `tol`. Endpoints are compared against the interior result,
/// so a minimum sitting on the boundary is returned exactly.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Extremum {
    let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
    let f_lo = f(lo);
    let f_hi = f(hi);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iters = 0;
    while hi - lo > tol && iters < 200 {
        iters += 1;
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let mut best = if f1 <= f2 {
        Extremum { x: x1, value: f1 }
    } else {
        Extremum { x: x2, value: f2 }
    };
    if f_lo < best.value {
        best = Extremum {
            x: a.min(b),
            value: f_lo,
        };
    }
    if f_hi < best.value {
        best = Extremum {
            x: a.max(b),
            value: f_hi,
        };
    }
    best
}

/// Golden-section maximisation; see [`golden_min`].
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Extremum {
    let e = golden_min(|x| -f(x), a, b, tol);
    Extremum {
        x: e.x,
        value: -e.value,
    }
}

/// Bisection for a sign change of `f` on `[a, b]`.
///
/// Requires `f(a)` and `f(b)` of opposite sign (zero counts as either).
/// Returns `None` when there is no sign change.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Option<f64> {
    let (mut lo, mut hi) = (a, b);
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Some(lo);
    }
    if f_hi == 0.0 {
        return Some(hi);
    }
    if f_lo.is_nan() || f_hi.is_nan() || (f_lo > 0.0) == (f_hi > 0.0) {
        return None;
    }
    for _ in 0..400 {
        if (hi - lo).abs() <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if (fm > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Standard normal CDF, accurate in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// `log(sum_k w_k exp(x_k))` without overflow. Terms with `w_k <= 0` are skipped.
pub fn log_sum_exp<I: IntoIterator<Item = (f64, f64)>>(terms: I) -> f64 {
    let terms: Vec<(f64, f64)> = terms.into_iter().filter(|&(w, _)| w > 0.0).collect();
    let max = terms.iter().fold(f64::NEG_INFINITY, |m, &(_, x)| m.max(x));
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = terms.iter().map(|&(w, x)| w * (x - max).exp()).sum();
    max + sum.ln()
}
