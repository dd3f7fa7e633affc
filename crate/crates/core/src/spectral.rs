//! Perron root of the moment matrix `m(s)` and everything derived from it.
//!
//! `m(s)` is evaluated in log scale: entries are divided by their largest
//! value before power iteration and the shift is added back to `log rho`.
//! This keeps `rho(s)` representable for orders where the raw moments
//! overflow or underflow.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use spin::{Once, RwLock};

use crate::error::{Error, Result};
use crate::laws::ModelSpec;
use crate::numeric::{golden_max, golden_min};

/// Default Perron residual tolerance.
pub const PERRON_TOL: f64 = 1e-12;
/// Power iteration gives up after this many steps.
pub const MAX_POWER_ITERATIONS: usize = 1_000_000;
/// First bracket `[0, S_INITIAL]` for the one-dimensional searches in `s`.
pub const S_INITIAL: f64 = 1.0;
/// Bracket doubling stops here (64 times the initial bracket).
pub const S_MAX: f64 = 64.0 * S_INITIAL;
/// Absolute tolerance in `s` for golden-section and bisection searches.
pub const S_TOL: f64 = 1e-10;

const CACHE_LIMIT: usize = 1 << 14;

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    d: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let d = rows.len();
        assert!(rows.iter().all(|r| r.len() == d), "matrix must be square");
        Self {
            d,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    pub fn from_fn(d: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                data.push(f(i, j));
            }
        }
        Self { d, data }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.d + j]
    }

    fn apply(&self, v: &[f64], out: &mut [f64], transpose: bool) {
        let d = self.d;
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..d)
                .map(|j| {
                    let a = if transpose {
                        self.get(j, i)
                    } else {
                        self.get(i, j)
                    };
                    a * v[j]
                })
                .sum();
        }
    }
}

/// Dominant eigenvalue with its right and left eigenvectors, both scaled to
/// unit sum.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PerronTriple {
    pub rho: f64,
    pub right: Vec<f64>,
    pub left: Vec<f64>,
    /// `max_i |(m v)_i - rho v_i|` for the returned right vector.
    pub residual: f64,
}

/// Sum-normalised iterate, its Rayleigh-type root estimate `sum(M v)` and
/// the residual `max |M v - rho v|`.
fn assess(mat: &SquareMatrix, v: &[f64], y: &mut [f64], transpose: bool) -> (f64, f64) {
    mat.apply(v, y, transpose);
    let rho: f64 = y.iter().sum();
    let residual = y
        .iter()
        .zip(v)
        .fold(0.0f64, |m, (yi, vi)| m.max((yi - rho * vi).abs()));
    (rho, residual)
}

/// Solves `(A - sigma I) x = b` by Gaussian elimination with partial
/// pivoting; `None` if the shifted matrix is numerically singular.
fn shifted_solve(mat: &SquareMatrix, sigma: f64, b: &[f64], transpose: bool) -> Option<Vec<f64>> {
    let d = mat.d();
    let mut a: Vec<f64> = (0..d * d)
        .map(|k| {
            let (i, j) = (k / d, k % d);
            let x = if transpose {
                mat.get(j, i)
            } else {
                mat.get(i, j)
            };
            if i == j {
                x - sigma
            } else {
                x
            }
        })
        .collect();
    let mut x = b.to_vec();
    for col in 0..d {
        let pivot =
            (col..d).max_by(|p, q| a[p * d + col].abs().total_cmp(&a[q * d + col].abs()))?;
        if a[pivot * d + col] == 0.0 {
            return None;
        }
        if pivot != col {
            for k in 0..d {
                a.swap(pivot * d + k, col * d + k);
            }
            x.swap(pivot, col);
        }
        for row in col + 1..d {
            let f = a[row * d + col] / a[col * d + col];
            for k in col..d {
                a[row * d + k] -= f * a[col * d + k];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..d).rev() {
        let tail: f64 = (col + 1..d).map(|k| a[col * d + k] * x[k]).sum();
        x[col] = (x[col] - tail) / a[col * d + col];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

const POWER_STEPS_BEFORE_SHIFT: usize = 64;

/// Power iteration, switching to shifted inverse iteration when the
/// spectral gap is small. The shift sits just above the Collatz-Wielandt
/// upper bound, so the Perron root is the nearest eigenvalue.
fn dominant_vector(mat: &SquareMatrix, tol: f64, transpose: bool) -> Result<(f64, Vec<f64>, f64)> {
    let d = mat.d();
    let mut v = vec![1.0 / d as f64; d];
    let mut y = vec![0.0; d];
    let mut residual = f64::INFINITY;
    for k in 0..MAX_POWER_ITERATIONS {
        let (rho, r) = assess(mat, &v, &mut y, transpose);
        residual = r;
        if residual <= tol * rho.max(1.0) {
            return Ok((rho, v, residual));
        }
        let shifted = if k >= POWER_STEPS_BEFORE_SHIFT {
            let upper = y.iter().zip(&v).fold(0.0f64, |m, (yi, vi)| m.max(yi / vi));
            let sigma = upper * (1.0 + 1e-9) + f64::MIN_POSITIVE;
            shifted_solve(mat, sigma, &v, transpose).and_then(|x| {
                let total: f64 = x.iter().sum();
                let x: Vec<f64> = x.iter().map(|xi| xi / total).collect();
                x.iter().all(|xi| *xi > 0.0).then_some(x)
            })
        } else {
            None
        };
        match shifted {
            Some(x) => v = x,
            None => {
                for (vi, yi) in v.iter_mut().zip(&y) {
                    *vi = yi / rho;
                }
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_POWER_ITERATIONS,
        residual,
    })
}

/// Perron root and eigenvectors of a strictly positive matrix (transpose
/// iteration for the left vector).
pub fn perron(mat: &SquareMatrix, tol: f64) -> Result<PerronTriple> {
    for i in 0..mat.d() {
        for j in 0..mat.d() {
            let a = mat.get(i, j);
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::NonPositiveMatrix { row: i, col: j });
            }
        }
    }
    let (rho, right, residual) = dominant_vector(mat, tol, false)?;
    let (_, left, _) = dominant_vector(mat, tol, true)?;
    Ok(PerronTriple {
        rho,
        right,
        left,
        residual,
    })
}

/// `m(s)`: entry `(i, j)` is `E[xi_ij^s]`.
pub fn build_m(model: &ModelSpec, s: f64) -> Result<SquareMatrix> {
    if !model.domain().contains(s) {
        return Err(Error::Domain { s });
    }
    let d = model.d();
    let mut data = Vec::with_capacity(d * d);
    for (_, law) in model.laws() {
        data.push(law.moment(s)?);
    }
    Ok(SquareMatrix { d, data })
}

/// `log m(s)` shifted so that its largest entry is 0; returns the shift.
fn scaled_m(model: &ModelSpec, s: f64) -> Result<(SquareMatrix, f64)> {
    if !model.domain().contains(s) {
        return Err(Error::Domain { s });
    }
    let d = model.d();
    let logs = model
        .laws()
        .map(|(_, law)| law.log_moment(s))
        .collect::<Result<Vec<f64>>>()?;
    let shift = logs.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x));
    let data = logs.iter().map(|l| (l - shift).exp()).collect();
    Ok((SquareMatrix { d, data }, shift))
}

const BALANCE_SWEEPS: usize = 64;

/// `exp(-shift) D^{-1} m(s) D` with `D = diag(exp(x))` chosen so that, in
/// log scale, every row maximum matches the column maximum. This keeps
/// entries of very different magnitude representable; the similarity
/// preserves the spectrum. Entries that still underflow are floored at the
/// smallest positive double, far below `rho` of the balanced matrix.
fn balanced_m(model: &ModelSpec, s: f64) -> Result<(SquareMatrix, f64, Vec<f64>)> {
    if !model.domain().contains(s) {
        return Err(Error::Domain { s });
    }
    let d = model.d();
    let logs = model
        .laws()
        .map(|(_, law)| law.log_moment(s))
        .collect::<Result<Vec<f64>>>()?;
    let mut x = vec![0.0; d];
    let entry = |x: &[f64], i: usize, j: usize| logs[i * d + j] - x[i] + x[j];
    for _ in 0..BALANCE_SWEEPS {
        let mut moved = 0.0f64;
        for i in 0..d {
            let row = (0..d)
                .filter(|j| *j != i)
                .fold(f64::NEG_INFINITY, |m, j| m.max(entry(&x, i, j)));
            let col = (0..d)
                .filter(|k| *k != i)
                .fold(f64::NEG_INFINITY, |m, k| m.max(entry(&x, k, i)));
            let step = 0.5 * (row - col);
            x[i] += step;
            moved = moved.max(step.abs());
        }
        if moved < 1.0 {
            break;
        }
    }
    let balanced: Vec<f64> = (0..d * d).map(|k| entry(&x, k / d, k % d)).collect();
    let shift = balanced.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let data = balanced
        .iter()
        .map(|l| (l - shift).exp().max(f64::MIN_POSITIVE))
        .collect();
    Ok((SquareMatrix { d, data }, shift, x))
}

/// Root colour convention for level moments and level sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum RootColour {
    Fixed(usize),
    /// Root colour drawn uniformly; quantities are averaged over colours.
    Uniform,
}

impl Default for RootColour {
    fn default() -> Self {
        RootColour::Fixed(0)
    }
}

/// `log E[exp(s S_n)]` for a path of length `n` started at the given root
/// colour: `log(e_c^T (m(s)/d)^n 1)`.
pub fn log_level_moment(model: &ModelSpec, s: f64, n: usize, root: RootColour) -> Result<f64> {
    let (mat, shift) = scaled_m(model, s)?;
    let d = model.d();
    let mut x = vec![1.0; d];
    let mut y = vec![0.0; d];
    let mut log_scale = 0.0;
    for _ in 0..n {
        mat.apply(&x, &mut y, false);
        let norm = y.iter().fold(0.0f64, |m, v| m.max(*v));
        log_scale += norm.ln();
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
    }
    let picked = match root {
        RootColour::Fixed(c) => {
            if c >= d {
                return Err(Error::InvalidModel(alloc::format!(
                    "root colour {c} out of range for d = {d}"
                )));
            }
            x[c]
        }
        RootColour::Uniform => x.iter().sum::<f64>() / d as f64,
    };
    Ok(picked.ln() + log_scale + n as f64 * (shift - (d as f64).ln()))
}

/// `E[exp(s S_n)]`; see [`log_level_moment`].
pub fn level_moment(model: &ModelSpec, s: f64, n: usize, root: RootColour) -> Result<f64> {
    Ok(log_level_moment(model, s, n, root)?.exp())
}

/// Spectral data of `m(s)` at one order `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPoint {
    pub s: f64,
    pub log_rho: f64,
    /// `Lambda(s) = log rho(s) - log d`.
    pub scgf: f64,
    /// `Lambda'(s) = rho'(s) / rho(s)`.
    pub scgf_prime: f64,
    /// Perron data of the balanced matrix
    /// `exp(-log_shift) D^{-1} m(s) D`, `D = diag(exp(log_balance))`.
    pub perron: PerronTriple,
    pub log_shift: f64,
    pub log_balance: Vec<f64>,
}

impl SpectralPoint {
    pub fn rho(&self) -> f64 {
        self.log_rho.exp()
    }

    pub fn rho_prime(&self) -> f64 {
        self.scgf_prime * self.rho()
    }

    /// Logs of the right Perron vector of `m(s)` itself, up to a common
    /// constant.
    pub fn log_right(&self) -> Vec<f64> {
        self.perron
            .right
            .iter()
            .zip(&self.log_balance)
            .map(|(v, x)| v.ln() + x)
            .collect()
    }

    /// `log(max v / min v)` over the right Perron vector of `m(s)`.
    pub fn log_right_spread(&self) -> f64 {
        let l = self.log_right();
        let max = l.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x));
        let min = l.iter().fold(f64::INFINITY, |m, x| m.min(*x));
        max - min
    }

    /// `max v / min v` over the right Perron vector of `m(s)`.
    pub fn right_spread(&self) -> f64 {
        self.log_right_spread().exp()
    }
}

/// How the infimum of `rho` over `s >= 0` was located.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum InfimumKind {
    /// Interior minimiser found by golden section.
    Interior,
    /// `rho'(0) >= 0`: the minimum is `rho(0) = d`.
    AtZero,
    /// `rho` still decreasing at `S_MAX`; `lambda` is `rho(S_MAX)`, an upper
    /// bound on the infimum, which is approached as `s -> infinity`.
    DecreasingBeyondBracket,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LambdaInf {
    pub lambda: f64,
    pub s_argmin: f64,
    pub kind: InfimumKind,
}

/// Memoised `s -> rho(s)` curve of one model.
///
/// Safe to share between threads: lookups take a read lock and inserts a
/// write lock.
pub struct SpectralCurve {
    model: ModelSpec,
    tol: f64,
    cache: RwLock<BTreeMap<u64, SpectralPoint>>,
    inf: Once<Result<LambdaInf>>,
}

impl core::fmt::Debug for SpectralCurve {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SpectralCurve")
            .field("d", &self.model.d())
            .field("tol", &self.tol)
            .finish_non_exhaustive()
    }
}

/// Runs `f` with a closure-friendly error slot: failed evaluations become
/// `fallback` and the first error is reported afterwards.
pub(crate) fn with_errors<T>(
    fallback: f64,
    f: impl FnOnce(&mut dyn FnMut(Result<f64>) -> f64) -> T,
) -> Result<T> {
    let mut first: Option<Error> = None;
    let out = {
        let mut sink = |r: Result<f64>| match r {
            Ok(v) => v,
            Err(e) => {
                first.get_or_insert(e);
                fallback
            }
        };
        f(&mut sink)
    };
    match first {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

impl SpectralCurve {
    pub fn new(model: ModelSpec) -> Self {
        Self::with_tolerance(model, PERRON_TOL)
    }

    pub fn with_tolerance(model: ModelSpec, tol: f64) -> Self {
        Self {
            model,
            tol,
            cache: RwLock::new(BTreeMap::new()),
            inf: Once::new(),
        }
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn d(&self) -> usize {
        self.model.d()
    }

    pub fn log_d(&self) -> f64 {
        (self.model.d() as f64).ln()
    }

    pub fn point(&self, s: f64) -> Result<SpectralPoint> {
        if let Some(p) = self.cache.read().get(&s.to_bits()) {
            return Ok(p.clone());
        }
        let p = self.compute(s)?;
        let mut cache = self.cache.write();
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(s.to_bits(), p.clone());
        Ok(p)
    }

    fn compute(&self, s: f64) -> Result<SpectralPoint> {
        let d = self.model.d();
        if s == 0.0 {
            // m(0) is the all-ones matrix: rho = d exactly, uniform vectors.
            let u = vec![1.0 / d as f64; d];
            let slope = self
                .model
                .laws()
                .map(|(_, l)| l.tilted_log_mean(0.0))
                .collect::<Result<Vec<_>>>()?
                .iter()
                .sum::<f64>()
                / (d * d) as f64;
            return Ok(SpectralPoint {
                s,
                log_rho: self.log_d(),
                scgf: 0.0,
                scgf_prime: slope,
                perron: PerronTriple {
                    rho: d as f64,
                    right: u.clone(),
                    left: u,
                    residual: 0.0,
                },
                log_shift: 0.0,
                log_balance: vec![0.0; d],
            });
        }
        // the derivative formula below is invariant under the balancing
        // similarity, so it is evaluated on the balanced matrix directly
        let (mat, shift, balance) = balanced_m(&self.model, s)?;
        let triple = perron(&mat, self.tol)?;
        let (v, w) = (&triple.right, &triple.left);
        let mut num = 0.0;
        for ((i, j), law) in self.model.laws() {
            num += w[i] * mat.get(i, j) * law.tilted_log_mean(s)? * v[j];
        }
        let wv: f64 = w.iter().zip(v).map(|(a, b)| a * b).sum();
        let log_rho = triple.rho.ln() + shift;
        Ok(SpectralPoint {
            s,
            log_rho,
            scgf: log_rho - self.log_d(),
            scgf_prime: num / (triple.rho * wv),
            perron: triple,
            log_shift: shift,
            log_balance: balance,
        })
    }

    pub fn rho(&self, s: f64) -> Result<f64> {
        Ok(self.point(s)?.rho())
    }

    pub fn log_rho(&self, s: f64) -> Result<f64> {
        Ok(self.point(s)?.log_rho)
    }

    /// `rho'(s) = w^T m'(s) v / (w^T v)`.
    pub fn rho_prime(&self, s: f64) -> Result<f64> {
        Ok(self.point(s)?.rho_prime())
    }

    /// `Lambda(s) = log rho(s) - log d`.
    pub fn scgf(&self, s: f64) -> Result<f64> {
        Ok(self.point(s)?.scgf)
    }

    /// `Lambda'(s)`.
    pub fn scgf_prime(&self, s: f64) -> Result<f64> {
        Ok(self.point(s)?.scgf_prime)
    }

    /// `lambda = inf_{s >= 0} rho(s)` and where it is attained.
    pub fn lambda_inf(&self) -> Result<LambdaInf> {
        self.inf.call_once(|| self.search_infimum()).clone()
    }

    fn search_infimum(&self) -> Result<LambdaInf> {
        if self.scgf_prime(0.0)? >= 0.0 {
            return Ok(LambdaInf {
                lambda: self.d() as f64,
                s_argmin: 0.0,
                kind: InfimumKind::AtZero,
            });
        }
        let mut hi = S_INITIAL;
        while self.scgf_prime(hi)? < 0.0 {
            if hi >= S_MAX {
                return Ok(LambdaInf {
                    lambda: self.rho(S_MAX)?,
                    s_argmin: S_MAX,
                    kind: InfimumKind::DecreasingBeyondBracket,
                });
            }
            hi *= 2.0;
        }
        let lo = if hi == S_INITIAL { 0.0 } else { 0.5 * hi };
        let best = with_errors(f64::INFINITY, |sink| {
            golden_min(|s| sink(self.log_rho(s)), lo, hi, S_TOL)
        })?;
        Ok(LambdaInf {
            lambda: best.value.exp(),
            s_argmin: best.x,
            kind: InfimumKind::Interior,
        })
    }

    /// Rate function built on this curve.
    pub fn rate_function(&self) -> Result<RateFunction<'_>> {
        RateFunction::new(self)
    }
}

/// Value of the rate function at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RateValue {
    pub z: f64,
    /// `Lambda*(z)`; `+inf` when `z` exceeds every attainable slope.
    pub value: f64,
    /// Maximiser `s0(z)` of `s z - Lambda(s)` over `s >= 0`.
    pub s0: f64,
    pub infinite: bool,
}

/// `Lambda*(z) = sup_{s >= 0} (s z - Lambda(s))`.
#[derive(Debug, Clone, Copy)]
pub struct RateFunction<'a> {
    curve: &'a SpectralCurve,
    slope_at_zero: f64,
    slope_at_edge: f64,
}

impl<'a> RateFunction<'a> {
    pub fn new(curve: &'a SpectralCurve) -> Result<Self> {
        Ok(Self {
            curve,
            slope_at_zero: curve.scgf_prime(0.0)?,
            slope_at_edge: curve.scgf_prime(S_MAX)?,
        })
    }

    pub fn curve(&self) -> &'a SpectralCurve {
        self.curve
    }

    /// `mu = -Lambda'(0) = -rho'(0) / d`.
    pub fn mu(&self) -> f64 {
        -self.slope_at_zero
    }

    /// `[Lambda'(0), Lambda'(S_MAX)]`: slopes reachable inside the bracket.
    pub fn slope_range(&self) -> (f64, f64) {
        (self.slope_at_zero, self.slope_at_edge)
    }

    pub fn eval(&self, z: f64) -> Result<RateValue> {
        if z <= self.slope_at_zero {
            return Ok(RateValue {
                z,
                value: 0.0,
                s0: 0.0,
                infinite: false,
            });
        }
        if z > self.slope_at_edge {
            return Ok(RateValue {
                z,
                value: f64::INFINITY,
                s0: f64::INFINITY,
                infinite: true,
            });
        }
        let mut hi = S_INITIAL;
        while self.curve.scgf_prime(hi)? < z && hi < S_MAX {
            hi *= 2.0;
        }
        let lo = if hi == S_INITIAL { 0.0 } else { 0.5 * hi };
        let best = with_errors(f64::NEG_INFINITY, |sink| {
            golden_max(
                |s| sink(self.curve.scgf(s).map(|l| s * z - l)),
                lo,
                hi,
                S_TOL,
            )
        })?;
        Ok(RateValue {
            z,
            value: best.value.max(0.0),
            s0: best.x,
            infinite: false,
        })
    }

    /// `Lambda*(z)` only.
    pub fn value(&self, z: f64) -> Result<f64> {
        Ok(self.eval(z)?.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::LabelLaw;
    use core::f64::consts::LN_2;

    fn lognormal_model() -> ModelSpec {
        ModelSpec::iid(2, LabelLaw::lognormal(-1.5, 1.0).unwrap()).unwrap()
    }

    fn atomic_model() -> ModelSpec {
        ModelSpec::iid(
            2,
            LabelLaw::atomic(vec![0.25, 0.5], vec![0.5, 0.5]).unwrap(),
        )
        .unwrap()
    }

    fn det_model(c: f64) -> ModelSpec {
        ModelSpec::iid(2, LabelLaw::deterministic(c).unwrap()).unwrap()
    }

    #[test]
    fn build_m_examples() {
        let m = build_m(&lognormal_model(), 0.0).unwrap();
        assert!((0..2).all(|i| (0..2).all(|j| m.get(i, j) == 1.0)));
        let m = build_m(&atomic_model(), 1.0).unwrap();
        assert!((m.get(1, 0) - 0.375).abs() < 1e-15);
        let m = build_m(&lognormal_model(), 1.0).unwrap();
        assert!((m.get(0, 1) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn perron_examples() {
        let t = perron(&SquareMatrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]), 1e-12).unwrap();
        assert!((t.rho - 3.0).abs() < 1e-12);
        assert!((t.right[0] - 0.5).abs() < 1e-12);
        let t = perron(&SquareMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 1.0]]), 1e-12).unwrap();
        assert!((t.rho - (1.0 + 6.0f64.sqrt())).abs() < 1e-10);
        let t = perron(&SquareMatrix::from_rows(&[&[0.3, 0.6], &[0.2, 0.5]]), 1e-12).unwrap();
        assert!((t.rho - (0.8 + 0.52f64.sqrt()) / 2.0).abs() < 1e-12);
        assert!(t.right.iter().chain(&t.left).all(|x| *x > 0.0));
    }

    #[test]
    fn perron_rejects_non_positive() {
        let err = perron(&SquareMatrix::from_rows(&[&[1.0, 0.0], &[1.0, 1.0]]), 1e-12).unwrap_err();
        assert_eq!(err, Error::NonPositiveMatrix { row: 0, col: 1 });
    }

    #[test]
    fn rho_examples() {
        let c = SpectralCurve::new(atomic_model());
        assert_eq!(c.rho(0.0).unwrap(), 2.0);
        for s in [0.3, 1.0, 2.5] {
            let exact = 4f64.powf(-s) + 2f64.powf(-s);
            assert!((c.rho(s).unwrap() - exact).abs() < 1e-12);
        }
        let c = SpectralCurve::new(lognormal_model());
        assert!((c.rho(1.5).unwrap() - 2.0 * (-1.125f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn rho_prime_examples() {
        let c = SpectralCurve::new(atomic_model());
        assert!((c.rho_prime(0.0).unwrap() + 3.0 * LN_2).abs() < 1e-12);
        let c = SpectralCurve::new(lognormal_model());
        assert!((c.rho_prime(0.0).unwrap() + 3.0).abs() < 1e-12);
        let inf = c.lambda_inf().unwrap();
        assert!(c.rho_prime(inf.s_argmin).unwrap().abs() < 1e-7);
    }

    #[test]
    fn lambda_inf_examples() {
        let c = SpectralCurve::new(lognormal_model());
        let inf = c.lambda_inf().unwrap();
        assert_eq!(inf.kind, InfimumKind::Interior);
        assert!((inf.lambda - 2.0 * (-1.125f64).exp()).abs() < 1e-12);
        assert!((inf.s_argmin - 1.5).abs() < 1e-6);

        let c = SpectralCurve::new(atomic_model());
        let inf = c.lambda_inf().unwrap();
        assert_eq!(inf.kind, InfimumKind::DecreasingBeyondBracket);
        assert!(inf.lambda < 1.0);

        let c = SpectralCurve::new(det_model(2.0));
        let inf = c.lambda_inf().unwrap();
        assert_eq!(inf.kind, InfimumKind::AtZero);
        assert_eq!(inf.lambda, 2.0);
        assert_eq!(inf.s_argmin, 0.0);
    }

    #[test]
    fn scgf_examples() {
        let c = SpectralCurve::new(lognormal_model());
        assert_eq!(c.scgf(0.0).unwrap(), 0.0);
        assert!((c.scgf(1.0).unwrap() + 1.0).abs() < 1e-12);
        let c = SpectralCurve::new(atomic_model());
        // rho(1) = 0.75, so Lambda(1) = log(0.75 / 2)
        assert!((c.scgf(1.0).unwrap() - 0.375f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn level_moment_examples() {
        let m = ModelSpec::new(vec![
            vec![
                LabelLaw::lognormal(-1.0, 0.5).unwrap(),
                LabelLaw::deterministic(0.3).unwrap(),
            ],
            vec![
                LabelLaw::loguniform(-1.0, 0.2).unwrap(),
                LabelLaw::atomic(vec![0.5, 2.0], vec![0.7, 0.3]).unwrap(),
            ],
        ])
        .unwrap();
        for c in 0..2 {
            let one = level_moment(&m, 0.7, 1, RootColour::Fixed(c)).unwrap();
            let direct =
                (m.law(c, 0).moment(0.7).unwrap() + m.law(c, 1).moment(0.7).unwrap()) / 2.0;
            assert!((one - direct).abs() < 1e-14);
        }
        let v = level_moment(&atomic_model(), 1.0, 3, RootColour::Fixed(0)).unwrap();
        assert!((v - 0.375f64.powi(3)).abs() < 1e-15);
        let v = level_moment(&lognormal_model(), 1.0, 50, RootColour::Fixed(1)).unwrap();
        assert!((v.powf(1.0 / 50.0) - (-1.0f64).exp()).abs() < 1e-2);
    }

    #[test]
    fn rate_function_examples() {
        let c = SpectralCurve::new(lognormal_model());
        let rf = c.rate_function().unwrap();
        assert_eq!(rf.value(-rf.mu()).unwrap(), 0.0);
        assert!((rf.mu() - 1.5).abs() < 1e-14);
        assert!((rf.value(0.0).unwrap() - 1.125).abs() < 1e-10);
        let r = rf.eval(-0.9294).unwrap();
        assert!((r.value - (1.5f64 - 0.9294).powi(2) / 2.0).abs() < 1e-10);
        assert!((r.s0 - 0.5706).abs() < 1e-6);
        assert_eq!(rf.value(-3.0).unwrap(), 0.0);
    }

    #[test]
    fn mu_examples() {
        let c = SpectralCurve::new(atomic_model());
        assert!((c.rate_function().unwrap().mu() - 1.5 * LN_2).abs() < 1e-14);
        let c = SpectralCurve::new(det_model(2.0));
        assert!((c.rate_function().unwrap().mu() + LN_2).abs() < 1e-14);
    }

    #[test]
    fn rate_function_is_infinite_beyond_largest_atom() {
        let c = SpectralCurve::new(atomic_model());
        let rf = c.rate_function().unwrap();
        let r = rf.eval(-0.5).unwrap();
        assert!(r.infinite);
        assert_eq!(r.value, f64::INFINITY);
    }

    #[test]
    fn curve_is_shareable_across_threads() {
        fn assert_sync<T: Sync + Send>() {}
        assert_sync::<SpectralCurve>();
    }
}
