use proptest::prelude::*;

use coverage_lab::limits::{corrected_cdf, limit_cdf, median_shift, r_t, transform_statistic, Regime, Setting};

fn setting(regime: usize, d: usize, k: usize, tau: f64) -> Setting {
    let regime = [Regime::Interior, Regime::Torus, Regime::SmoothBoundary, Regime::Polygon][regime];
    let d = if regime == Regime::Polygon { 2 } else { d };
    let sigma = regime.has_boundary().then_some(3.5);
    Setting::new(d, k, regime, tau, 0.7, sigma).unwrap()
}

proptest! {
    #[test]
    fn cdfs_are_valid(regime in 0usize..4, d in 2usize..5, k in 1usize..6, tau in 0.1f64..50.0, log_n in 3.0f64..40.0) {
        let s = setting(regime, d, k, tau);
        let limit = limit_cdf(&s);
        let corrected = corrected_cdf(&s, log_n.exp()).unwrap();
        for model in [&limit, &corrected] {
            let mut prev = 0.0;
            for i in 0..=300 {
                let f = model.eval(-15.0 + 0.1 * i as f64);
                prop_assert!((0.0..=1.0).contains(&f) && f >= prev);
                prev = f;
            }
            let m = median_shift(model).unwrap();
            prop_assert!((model.eval(m) - 0.5).abs() < 1e-8);
        }
    }

    #[test]
    fn radius_schedule_inverts_transform(regime in 0usize..4, d in 2usize..5, k in 1usize..6, beta in -5.0f64..10.0, log_t in 3.0f64..25.0) {
        let s = setting(regime, d, k, 1.0);
        let t = log_t.exp();
        let r = r_t(beta, t, &s).unwrap();
        let at_r = transform_statistic(r, t, &s).unwrap();
        if r > 0.0 {
            prop_assert!((at_r - beta).abs() < 1e-9 * (1.0 + log_t));
        } else {
            prop_assert!(at_r >= beta);
        }
    }

    #[test]
    fn corrected_approaches_limit(regime in 0usize..4, d in 2usize..4, k in 1usize..4, tau in 0.5f64..5.0) {
        let s = setting(regime, d, k, tau);
        let limit = limit_cdf(&s);
        let gap = |n: f64| {
            let c = corrected_cdf(&s, n).unwrap();
            (0..=150).map(|i| -5.0 + 0.1 * i as f64).map(|b| (c.eval(b) - limit.eval(b)).abs()).fold(0.0, f64::max)
        };
        prop_assert!(gap(1e200) <= gap(1e8) + 1e-12);
    }
}
