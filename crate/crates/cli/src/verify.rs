//! The `verify` cross-check suite: every invariant of the spectral curve,
//! the rate function and the two exponent routes, evaluated for one model.

use branch_exponent_core::exponents::{analyze, regime_of, Warning, CROSS_CHECK_TOL};
use branch_exponent_core::spectral::{log_level_moment, PERRON_TOL};
use branch_exponent_core::{check_conditions, Regime, Result, RootColour, SpectralCurve};
use serde::Serialize;

use crate::config::Tolerances;

const GRID_POINTS: usize = 41;
const CONVEXITY_SLACK: f64 = 1e-10;
const RATE_CONVEXITY_SLACK: f64 = 1e-7;
const RATE_AT_MEAN_TOL: f64 = 1e-8;
const BRW_RESIDUAL_TOL: f64 = 1e-8;
const DERIVATIVE_TOL: f64 = 1e-6;
const LEVEL_MOMENT_TOL: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// The measured quantity the check thresholds.
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    fn at_most(name: &'static str, value: f64, tolerance: f64) -> Self {
        Self {
            name,
            passed: value <= tolerance,
            value,
            tolerance,
        }
    }

    fn holds(name: &'static str, passed: bool, value: f64) -> Self {
        Self {
            name,
            passed,
            value,
            tolerance: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub regime: Regime,
    pub lambda: f64,
    pub mu: f64,
    pub checks: Vec<Check>,
    pub failed: usize,
}

fn s_grid(curve: &SpectralCurve) -> Result<Vec<f64>> {
    let inf = curve.lambda_inf()?;
    let hi = (2.0 * inf.s_argmin).clamp(2.0, 16.0);
    let domain = curve.model().domain();
    Ok((0..GRID_POINTS)
        .map(|k| hi * k as f64 / (GRID_POINTS - 1) as f64)
        .filter(|s| domain.contains(*s))
        .collect())
}

fn spectral_checks(curve: &SpectralCurve, tol: &Tolerances, checks: &mut Vec<Check>) -> Result<()> {
    let grid = s_grid(curve)?;
    let mut residual: f64 = 0.0;
    let mut derivative: f64 = 0.0;
    for &s in &grid {
        let p = curve.point(s)?;
        residual = residual.max(p.perron.residual / p.perron.rho.max(1.0));
        if s > 0.0 {
            let h = 1e-5 * (1.0 + s);
            let fd = (curve.rho(s + h)? - curve.rho(s - h)?) / (2.0 * h);
            let exact = p.rho_prime();
            derivative = derivative.max((fd - exact).abs() / exact.abs().max(1e-3));
        }
    }
    checks.push(Check::at_most(
        "perron-residual",
        residual,
        tol.spectral.unwrap_or(PERRON_TOL),
    ));
    checks.push(Check::at_most(
        "rho-prime-finite-difference",
        derivative,
        tol.derivative.unwrap_or(DERIVATIVE_TOL),
    ));

    let scgf: Vec<f64> = grid.iter().map(|s| curve.scgf(*s)).collect::<Result<_>>()?;
    let worst = grid
        .windows(3)
        .zip(scgf.windows(3))
        .map(|(s, l)| {
            let w = (s[1] - s[0]) / (s[2] - s[0]);
            l[1] - ((1.0 - w) * l[0] + w * l[2])
        })
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::at_most("scgf-convexity", worst, CONVEXITY_SLACK));
    Ok(())
}

fn rate_checks(curve: &SpectralCurve, checks: &mut Vec<Check>) -> Result<()> {
    let rf = curve.rate_function()?;
    let mean = -rf.mu();
    checks.push(Check::at_most(
        "rate-at-mean",
        rf.value(mean)?.abs(),
        RATE_AT_MEAN_TOL,
    ));

    let below = [1.0, 0.5, 0.1]
        .iter()
        .map(|h| rf.value(mean - h))
        .collect::<Result<Vec<_>>>()?;
    checks.push(Check::holds(
        "rate-zero-below-mean",
        below.iter().all(|v| *v == 0.0),
        below.iter().fold(0.0, |m, v| m.max(v.abs())),
    ));

    let h = 0.05;
    let values = (0..30)
        .map(|k| rf.value(mean + h * k as f64))
        .collect::<Result<Vec<_>>>()?;
    let negative = values.iter().fold(0.0f64, |m, v| m.max(-v));
    checks.push(Check::at_most("rate-nonnegative", negative, 0.0));
    let concave = values
        .windows(3)
        .filter(|w| w.iter().all(|v| v.is_finite()))
        .map(|w| -(w[0] - 2.0 * w[1] + w[2]))
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::at_most(
        "rate-convexity",
        concave,
        RATE_CONVEXITY_SLACK,
    ));

    let lambda = curve.lambda_inf()?.lambda;
    let rate0 = rf.value(0.0)?;
    if regime_of(lambda) != Regime::Critical {
        checks.push(Check::holds(
            "finite-iff-rate-exceeds-log-d",
            (lambda < 1.0) == (rate0 > curve.log_d()),
            rate0 - curve.log_d(),
        ));
    }
    Ok(())
}

/// `|(1/n) log E[exp(s S_n)] - Lambda(s)|` shrinks with `n`.
fn level_moment_check(curve: &SpectralCurve, checks: &mut Vec<Check>) -> Result<()> {
    let s = curve.lambda_inf()?.s_argmin.clamp(0.5, 4.0);
    let target = curve.scgf(s)?;
    let errors = [10usize, 100, 1000]
        .iter()
        .map(|&n| {
            log_level_moment(curve.model(), s, n, RootColour::Fixed(0))
                .map(|l| (l / n as f64 - target).abs())
        })
        .collect::<Result<Vec<_>>>()?;
    let shrinking = errors.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    checks.push(Check {
        name: "level-moment-decay",
        passed: shrinking && errors[2] <= LEVEL_MOMENT_TOL,
        value: errors[2],
        tolerance: LEVEL_MOMENT_TOL,
    });
    Ok(())
}

/// Runs every check. Numerical failures are reported in the checks;
/// errors are returned only when a quantity cannot be computed at all.
pub fn verify(curve: &SpectralCurve, tol: &Tolerances) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    let admissible = check_conditions(curve.model());
    checks.push(Check::holds(
        "moment-conditions",
        admissible.passes(),
        f64::from(u8::from(admissible.passes())),
    ));
    spectral_checks(curve, tol, &mut checks)?;
    rate_checks(curve, &mut checks)?;
    level_moment_check(curve, &mut checks)?;

    let report = analyze(curve)?;
    checks.push(Check::holds(
        "finite-regime",
        report.regime == Regime::Finite,
        report.lambda,
    ));
    checks.push(Check::holds("positive-drift", report.mu > 0.0, report.mu));
    if let Some(cross) = report.cross_residual {
        checks.push(Check::at_most(
            "variational-vs-spectral",
            cross,
            tol.cross_check.unwrap_or(CROSS_CHECK_TOL),
        ));
    }
    if let Some(u) = report.u_star {
        let interior = !report.warnings.contains(&Warning::MaximizerOnBoundary);
        checks.push(Check::holds("maximizer-interior", interior, u));
    }
    if let Some(r) = report.maximizer_residual {
        checks.push(Check::at_most("maximizer-identity", r, CROSS_CHECK_TOL));
    }
    if let Some(r) = report.brw_residual {
        checks.push(Check::at_most("brw-speed-equation", r, BRW_RESIDUAL_TOL));
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    Ok(VerifyReport {
        regime: report.regime,
        lambda: report.lambda,
        mu: report.mu,
        checks,
        failed,
    })
}
