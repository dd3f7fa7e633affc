//! Regime classification and the growth exponents of `E[Z(exp(-t))]`.
//!
//! The exponent is computed twice: as the maximum of
//! `f(u) = (log d - Lambda*(-u)) / u` over `u in (0, mu]`, and as the
//! smaller root of `rho(s) = 1`. The two routes share only the spectral
//! curve, so their agreement is a meaningful check.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Assumption, Error, Result};
use crate::laws::{LabelLaw, ModelSpec, PassageLaw};
use crate::numeric::{bisect, golden_max, golden_min};
use crate::spectral::{
    with_errors, InfimumKind, LambdaInf, SpectralCurve, S_INITIAL, S_MAX, S_TOL,
};

/// Half-width of the band around `lambda = 1` treated as critical.
pub const CRITICAL_BAND: f64 = 1e-9;
/// Largest accepted gap between the two exponent routes.
pub const CROSS_CHECK_TOL: f64 = 1e-6;
/// Grid resolution used to locate the maximiser of `f` before refining.
const VARIATIONAL_GRID: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Regime {
    /// `lambda < 1`: the count is a.s. finite.
    Finite,
    /// `lambda > 1`: the count is a.s. infinite.
    Infinite,
    /// `lambda` within [`CRITICAL_BAND`] of 1; no result is claimed.
    Critical,
}

pub fn regime_of(lambda: f64) -> Regime {
    if lambda < 1.0 - CRITICAL_BAND {
        Regime::Finite
    } else if lambda > 1.0 + CRITICAL_BAND {
        Regime::Infinite
    } else {
        Regime::Critical
    }
}

pub fn classify(curve: &SpectralCurve) -> Result<Regime> {
    Ok(regime_of(curve.lambda_inf()?.lambda))
}

pub(crate) fn require_finite(curve: &SpectralCurve) -> Result<LambdaInf> {
    let inf = curve.lambda_inf()?;
    match regime_of(inf.lambda) {
        Regime::Finite => Ok(inf),
        Regime::Infinite => Err(Error::AssumptionViolation(Assumption::FiniteRegime)),
        Regime::Critical => Err(Error::AssumptionViolation(Assumption::CriticalRegime)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct VariationalExponent {
    /// `M = max_{u in (0, mu]} f(u)`.
    pub m: f64,
    /// Maximiser of `f`.
    pub u_star: f64,
    pub mu: f64,
    /// `s0(-u_star)`; equals `M` at an interior maximiser.
    pub s0_at_u_star: f64,
}

/// `M` by maximising `f(u) = (log d - Lambda*(-u)) / u` over `(0, mu]`.
pub fn growth_exponent_variational(curve: &SpectralCurve) -> Result<VariationalExponent> {
    require_finite(curve)?;
    let rf = curve.rate_function()?;
    let mu = rf.mu();
    if mu.is_nan() || mu <= 0.0 {
        return Err(Error::AssumptionViolation(Assumption::PositiveDrift));
    }
    let log_d = curve.log_d();
    let f = |u: f64| -> Result<f64> {
        let r = rf.eval(-u)?;
        Ok(if r.infinite {
            f64::NEG_INFINITY
        } else {
            (log_d - r.value) / u
        })
    };

    // f -> -inf as u -> 0+ and f'(mu) < 0, but f may be -inf on a whole
    // initial segment (labels with bounded support), so a coarse scan picks
    // the bracket before golden section refines it.
    let step = mu / VARIATIONAL_GRID as f64;
    let mut best_k = VARIATIONAL_GRID;
    let mut best_val = f64::NEG_INFINITY;
    for k in 1..=VARIATIONAL_GRID {
        let v = f(step * k as f64)?;
        if v > best_val {
            best_val = v;
            best_k = k;
        }
    }
    let lo = (step * (best_k - 1) as f64).max(step * 1e-6);
    let hi = (step * (best_k + 1) as f64).min(mu);
    let refined = with_errors(f64::NEG_INFINITY, |sink| {
        golden_max(|u| sink(f(u)), lo, hi, S_TOL)
    })?;
    let (u_star, m) = if refined.value >= best_val {
        (refined.x, refined.value)
    } else {
        (step * best_k as f64, best_val)
    };
    let s0 = rf.eval(-u_star)?.s0;
    Ok(VariationalExponent {
        m,
        u_star,
        mu,
        s0_at_u_star: s0,
    })
}

/// `s1 = min { s >= 0 : rho(s) = 1 }` by bisection on `[0, s_argmin]`.
pub fn growth_exponent_spectral(curve: &SpectralCurve) -> Result<f64> {
    let inf = require_finite(curve)?;
    with_errors(f64::NAN, |sink| {
        bisect(|s| sink(curve.log_rho(s)), 0.0, inf.s_argmin, S_TOL)
    })?
    .ok_or_else(|| Error::BracketingFailure("log rho has no sign change on [0, s_argmin]".into()))
}

/// Both roots of `rho(s) = 1`; the upper one is `None` when `rho` keeps
/// decreasing past the search bracket.
pub fn unit_roots(curve: &SpectralCurve) -> Result<(f64, Option<f64>)> {
    let s1 = growth_exponent_spectral(curve)?;
    let inf = curve.lambda_inf()?;
    if inf.kind == InfimumKind::DecreasingBeyondBracket {
        return Ok((s1, None));
    }
    let mut hi = inf.s_argmin.max(S_INITIAL);
    while curve.log_rho(hi)? < 0.0 {
        if hi >= S_MAX {
            return Ok((s1, None));
        }
        hi = (2.0 * hi).min(S_MAX);
    }
    let s2 = with_errors(f64::NAN, |sink| {
        bisect(|s| sink(curve.log_rho(s)), inf.s_argmin, hi, S_TOL)
    })?;
    Ok((s1, s2))
}

/// `inf_{s >= 0} (s x + log rho(s))` and where it is attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedInfimum {
    pub value: f64,
    pub s: f64,
    /// The objective is still decreasing at `S_MAX`; `value` is `-inf`.
    pub unbounded: bool,
}

/// Inner problem of the speed equation, minimised by golden section.
pub fn speed_infimum(curve: &SpectralCurve, x: f64, tol: f64) -> Result<SpeedInfimum> {
    let slope = |s: f64| -> Result<f64> { Ok(x + curve.scgf_prime(s)?) };
    if slope(0.0)? >= 0.0 {
        return Ok(SpeedInfimum {
            value: curve.log_rho(0.0)?,
            s: 0.0,
            unbounded: false,
        });
    }
    let mut hi = S_INITIAL;
    while slope(hi)? < 0.0 {
        if hi >= S_MAX {
            return Ok(SpeedInfimum {
                value: f64::NEG_INFINITY,
                s: f64::INFINITY,
                unbounded: true,
            });
        }
        hi *= 2.0;
    }
    let lo = if hi == S_INITIAL { 0.0 } else { 0.5 * hi };
    let best = with_errors(f64::INFINITY, |sink| {
        golden_min(|s| sink(curve.log_rho(s).map(|l| s * x + l)), lo, hi, tol)
    })?;
    Ok(SpeedInfimum {
        value: best.value,
        s: best.x,
        unbounded: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BrwSpeed {
    /// Asymptotic minimal displacement per generation.
    pub x0: f64,
    /// `inf_s (s x0 + log rho(s))` at the returned `x0`.
    pub equation_value: f64,
    /// Minimiser of the inner problem at `x0`.
    pub s_star: f64,
}

const SPEED_X_TOL: f64 = 1e-12;

/// Root of `g(x) = inf_{s >= 0} (s x + log rho(s))`, labels read as
/// `xi = exp(-jump)`.
pub fn brw_speed(curve: &SpectralCurve) -> Result<BrwSpeed> {
    let inner_tol = S_TOL / 10.0;
    let g = |x: f64| -> Result<f64> { Ok(speed_infimum(curve, x, inner_tol)?.value) };
    // At x = mu the inner minimum sits at s = 0, so g = log d > 0.
    let x_hi = -curve.scgf_prime(0.0)?;
    let mut width = 1.0;
    let mut x_lo = x_hi - width;
    let mut expansions = 0;
    while g(x_lo)? >= 0.0 {
        expansions += 1;
        if expansions > 60 {
            return Err(Error::BracketingFailure(
                "speed function has no sign change below mu".into(),
            ));
        }
        width *= 2.0;
        x_lo = x_hi - width;
    }
    let x0 = with_errors(f64::NAN, |sink| {
        bisect(
            |x| {
                let v = sink(g(x));
                if v == f64::NEG_INFINITY {
                    -1.0
                } else {
                    v
                }
            },
            x_lo,
            x_hi,
            SPEED_X_TOL,
        )
    })?
    .ok_or_else(|| Error::BracketingFailure("speed function bisection lost its bracket".into()))?;
    let at = speed_infimum(curve, x0, inner_tol)?;
    Ok(BrwSpeed {
        x0,
        equation_value: at.value,
        s_star: at.s,
    })
}

/// `|inf_{s >= 0} exp(s x) rho(s) - 1|`, located by bisection on the
/// derivative rather than by golden section on the value.
pub fn speed_equation_residual(curve: &SpectralCurve, x: f64) -> Result<f64> {
    let slope = |s: f64| -> Result<f64> { Ok(x + curve.scgf_prime(s)?) };
    let s_star = if slope(0.0)? >= 0.0 {
        0.0
    } else {
        let mut hi = S_INITIAL;
        while slope(hi)? < 0.0 {
            if hi >= S_MAX {
                return Ok(1.0);
            }
            hi *= 2.0;
        }
        with_errors(f64::NAN, |sink| bisect(|s| sink(slope(s)), 0.0, hi, 1e-14))?
            .ok_or_else(|| Error::BracketingFailure("derivative has no sign change".into()))?
    };
    Ok(((s_star * x + curve.log_rho(s_star)?).exp() - 1.0).abs())
}

/// Push-forward `xi = exp(-tau)` of a matrix of passage-time laws.
pub fn fpp_transform(passage: &[Vec<PassageLaw>]) -> Result<ModelSpec> {
    let rows = passage
        .iter()
        .map(|row| row.iter().map(passage_to_label).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    ModelSpec::new(rows)
}

fn passage_to_label(law: &PassageLaw) -> Result<LabelLaw> {
    let representable = |tau: f64| {
        let x = (-tau).exp();
        x.is_finite() && x > 0.0
    };
    match law {
        PassageLaw::Normal { mean, sd } => LabelLaw::lognormal(-mean, *sd),
        PassageLaw::Atomic { values, probs } => {
            if let Some(v) = values.iter().find(|v| !representable(**v)) {
                return Err(Error::UnsupportedLaw(alloc::format!(
                    "passage time {v} has no representable exp(-tau)"
                )));
            }
            LabelLaw::atomic_from_logs(values.iter().map(|v| -v).collect(), probs.clone())
        }
        PassageLaw::Uniform { lower, upper } => {
            if !(representable(*lower) && representable(*upper)) {
                return Err(Error::UnsupportedLaw(alloc::format!(
                    "uniform passage time on [{lower}, {upper}] is not representable"
                )));
            }
            LabelLaw::loguniform(-upper, -lower)
        }
        PassageLaw::Constant { value } => {
            if !representable(*value) {
                return Err(Error::UnsupportedLaw(alloc::format!(
                    "passage time {value} has no representable exp(-tau)"
                )));
            }
            LabelLaw::deterministic_from_log(-value)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Warning {
    /// All labels are one common point mass; `Lambda` is linear.
    NonstrictConvexity,
    /// `rho` still decreasing at the end of the search bracket.
    InfimumBeyondBracket,
    CriticalRegime,
    InfiniteRegime,
    /// `mu <= 0`.
    DriftNotPositive,
    /// The maximiser of `f` is not strictly inside `(0, mu)`.
    MaximizerOnBoundary,
    /// The two exponent routes disagree by more than [`CROSS_CHECK_TOL`].
    CrossCheckFailed,
    BrwSpeedUnavailable,
}

/// Everything the `analyze` pipeline reports for one model.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ExponentReport {
    pub d: usize,
    pub regime: Regime,
    pub lambda: f64,
    pub lambda_argmin: f64,
    pub infimum_kind: InfimumKind,
    pub mu: f64,
    pub m_variational: Option<f64>,
    pub u_star: Option<f64>,
    pub s1_spectral: Option<f64>,
    pub cross_residual: Option<f64>,
    /// `|f(u*) - s0(-u*)|`.
    pub maximizer_residual: Option<f64>,
    pub x0_brw: Option<f64>,
    /// `|inf_s exp(s x0) rho(s) - 1|`, recomputed independently.
    pub brw_residual: Option<f64>,
    pub warnings: Vec<Warning>,
}

impl ExponentReport {
    /// Cross-check of the two exponent routes passed (or was not applicable).
    pub fn consistent(&self) -> bool {
        self.cross_residual.is_none_or(|r| r <= CROSS_CHECK_TOL)
    }
}

/// Full exponent analysis. Hypothesis failures end up as warnings, not errors.
pub fn analyze(curve: &SpectralCurve) -> Result<ExponentReport> {
    let inf = curve.lambda_inf()?;
    let regime = regime_of(inf.lambda);
    let rf = curve.rate_function()?;
    let mu = rf.mu();
    let mut warnings = Vec::new();
    if curve.model().all_deterministic_equal() {
        warnings.push(Warning::NonstrictConvexity);
    }
    if inf.kind == InfimumKind::DecreasingBeyondBracket {
        warnings.push(Warning::InfimumBeyondBracket);
    }
    match regime {
        Regime::Critical => warnings.push(Warning::CriticalRegime),
        Regime::Infinite => warnings.push(Warning::InfiniteRegime),
        Regime::Finite => {}
    }
    if mu.is_nan() || mu <= 0.0 {
        warnings.push(Warning::DriftNotPositive);
    }

    let mut report = ExponentReport {
        d: curve.d(),
        regime,
        lambda: inf.lambda,
        lambda_argmin: inf.s_argmin,
        infimum_kind: inf.kind,
        mu,
        m_variational: None,
        u_star: None,
        s1_spectral: None,
        cross_residual: None,
        maximizer_residual: None,
        x0_brw: None,
        brw_residual: None,
        warnings,
    };

    if regime == Regime::Finite && mu > 0.0 {
        let var = growth_exponent_variational(curve)?;
        let s1 = growth_exponent_spectral(curve)?;
        if !(var.u_star > 0.0 && var.u_star < mu) || var.u_star >= mu * (1.0 - 1e-9) {
            report.warnings.push(Warning::MaximizerOnBoundary);
        }
        let cross = (var.m - s1).abs();
        if cross > CROSS_CHECK_TOL {
            report.warnings.push(Warning::CrossCheckFailed);
        }
        report.m_variational = Some(var.m);
        report.u_star = Some(var.u_star);
        report.s1_spectral = Some(s1);
        report.cross_residual = Some(cross);
        report.maximizer_residual = Some((var.m - var.s0_at_u_star).abs());
    }

    match brw_speed(curve) {
        Ok(speed) => {
            report.x0_brw = Some(speed.x0);
            report.brw_residual = Some(speed_equation_residual(curve, speed.x0)?);
        }
        Err(Error::BracketingFailure(_)) => report.warnings.push(Warning::BrwSpeedUnavailable),
        Err(e) => return Err(e),
    }
    Ok(report)
}
