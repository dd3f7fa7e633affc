//! Randomised invariants of the spectral curve and the growth exponents.

use branch_exponent_core::exponents::{
    growth_exponent_spectral, growth_exponent_variational, regime_of, CROSS_CHECK_TOL,
};
use branch_exponent_core::spectral::SpectralCurve;
use branch_exponent_core::{LabelLaw, ModelSpec, Regime};
use proptest::prelude::*;

fn label_law() -> impl Strategy<Value = LabelLaw> {
    prop_oneof![
        (-3.0..-0.8f64, 0.2..1.5f64).prop_map(|(m, s)| LabelLaw::lognormal(m, s).unwrap()),
        (-4.0..-1.0f64, 0.1..2.0f64).prop_map(|(lo, w)| LabelLaw::loguniform(lo, lo + w).unwrap()),
        prop::collection::vec((0.02..0.9f64, 0.1..1.0f64), 2..4).prop_map(|pairs| {
            let total: f64 = pairs.iter().map(|p| p.1).sum();
            LabelLaw::atomic(
                pairs.iter().map(|p| p.0).collect(),
                pairs.iter().map(|p| p.1 / total).collect(),
            )
            .unwrap()
        }),
        (0.05..0.6f64).prop_map(|c| LabelLaw::deterministic(c).unwrap()),
    ]
}

fn model() -> impl Strategy<Value = ModelSpec> {
    (2usize..4).prop_flat_map(|d| {
        prop::collection::vec(label_law(), d * d).prop_map(move |laws| {
            let rows = laws.chunks(d).map(|r| r.to_vec()).collect();
            ModelSpec::new(rows).unwrap()
        })
    })
}

/// Finite regime away from the critical band, positive drift.
fn admissible(curve: &SpectralCurve) -> bool {
    let inf = curve.lambda_inf().unwrap();
    inf.lambda < 1.0 - 1e-3 && curve.rate_function().unwrap().mu() > 0.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn variational_and_spectral_exponents_agree(m in model()) {
        let c = SpectralCurve::new(m);
        prop_assume!(admissible(&c));
        let v = growth_exponent_variational(&c).unwrap();
        let s1 = growth_exponent_spectral(&c).unwrap();
        prop_assert!((v.m - s1).abs() <= CROSS_CHECK_TOL, "M = {}, s1 = {}", v.m, s1);
    }

    #[test]
    fn maximiser_is_interior_and_satisfies_first_order_identity(m in model()) {
        prop_assume!(!m.all_deterministic_equal());
        let c = SpectralCurve::new(m);
        prop_assume!(admissible(&c));
        let v = growth_exponent_variational(&c).unwrap();
        prop_assert!(v.u_star > 0.0 && v.u_star < v.mu, "u* = {}, mu = {}", v.u_star, v.mu);
        prop_assert!((v.m - v.s0_at_u_star).abs() <= 1e-6, "f = {}, s0 = {}", v.m, v.s0_at_u_star);
    }

    #[test]
    fn log_rho_changes_sign_at_the_smaller_root(m in model()) {
        let c = SpectralCurve::new(m);
        prop_assume!(admissible(&c));
        let s1 = growth_exponent_spectral(&c).unwrap();
        for k in 0..10 {
            let s = s1 * k as f64 / 10.0;
            prop_assert!(c.log_rho(s).unwrap() > 0.0, "log rho({s}) <= 0 below s1 = {s1}");
        }
        let above = s1 + 1e-4 * (1.0 + s1);
        prop_assert!(c.log_rho(above).unwrap() < 0.0);
    }

    #[test]
    fn scgf_is_convex(m in model()) {
        let c = SpectralCurve::new(m);
        let h = 0.05;
        for k in 1..60 {
            let s = h * k as f64;
            let second = c.scgf(s + h).unwrap() - 2.0 * c.scgf(s).unwrap() + c.scgf(s - h).unwrap();
            prop_assert!(second >= -1e-9, "second difference {second} at s = {s}");
        }
    }

    #[test]
    fn rho_prime_matches_finite_differences(m in model(), s in 0.05..4.0f64) {
        let c = SpectralCurve::new(m);
        let h = 1e-5 * (1.0 + s);
        let fd = (c.rho(s + h).unwrap() - c.rho(s - h).unwrap()) / (2.0 * h);
        let exact = c.rho_prime(s).unwrap();
        prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1e-3), "fd {fd} vs {exact}");
    }

    #[test]
    fn finite_regime_iff_rate_at_zero_exceeds_log_d(m in model()) {
        let c = SpectralCurve::new(m);
        let lambda = c.lambda_inf().unwrap().lambda;
        prop_assume!((lambda - 1.0).abs() > 1e-6);
        let rate0 = c.rate_function().unwrap().value(0.0).unwrap();
        prop_assert_eq!(lambda < 1.0, rate0 > c.log_d(), "lambda = {}, Lambda*(0) = {}", lambda, rate0);
        prop_assert_eq!(regime_of(lambda) == Regime::Finite, lambda < 1.0);
    }

    #[test]
    fn rate_function_is_convex_nonnegative_and_zero_below_the_mean(m in model()) {
        let c = SpectralCurve::new(m);
        let rf = c.rate_function().unwrap();
        let mean = -rf.mu();
        prop_assert!(rf.value(mean).unwrap().abs() <= 1e-8);
        prop_assert_eq!(rf.value(mean - 0.5).unwrap(), 0.0);
        let h = 0.05;
        let vals: Vec<f64> = (0..30).map(|k| rf.value(mean + h * k as f64).unwrap()).collect();
        for w in vals.windows(3) {
            prop_assert!(w.iter().all(|v| *v >= 0.0));
            if w.iter().all(|v| v.is_finite()) {
                prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-7, "{:?}", w);
            }
        }
    }

    #[test]
    fn gaussian_scaling_covariance(loc in -3.0..-1.6f64, sd in 0.3..1.2f64, shift in -0.5..0.5f64) {
        // Lambda(s) = loc s + sd^2 s^2 / 2 for d = 2
        let base = ModelSpec::iid(2, LabelLaw::lognormal(loc, sd).unwrap()).unwrap();
        let scaled = SpectralCurve::new(base.scaled(shift).unwrap());
        let base = SpectralCurve::new(base);
        let mu = base.rate_function().unwrap().mu();
        let mu_scaled = scaled.rate_function().unwrap().mu();
        prop_assert!((mu_scaled - (mu - shift)).abs() <= 1e-12);
        let l = loc + shift;
        let disc = l * l - 2.0 * sd * sd * core::f64::consts::LN_2;
        prop_assume!(disc > 1e-3);
        let root = (-l - disc.sqrt()) / (sd * sd);
        prop_assert!((growth_exponent_spectral(&scaled).unwrap() - root).abs() <= 1e-8);
    }
}
