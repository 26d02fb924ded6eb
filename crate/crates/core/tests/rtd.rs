use coilopt::optim::rng_from_seed;
use coilopt::rtd::*;
use proptest::prelude::*;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, Gamma};

/// Raw trace of the tanks model with mean residence `t_mean` seconds, windowed
/// wide enough to hold essentially all of the tracer.
fn tanks_trace(n: f64, t_mean: f64, samples: usize) -> (Vec<f64>, Vec<f64>) {
    let theta_max = 1.0 + 8.0 / n.sqrt();
    let t: Vec<f64> = (0..samples)
        .map(|i| t_mean * theta_max * i as f64 / (samples - 1) as f64)
        .collect();
    let c = t.iter().map(|&ti| 3.0 * tanks_model(n, ti / t_mean)).collect();
    (t, c)
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn model_integrates_to_one() {
    for n in [2.0, 10.0, 60.0] {
        let quad = simpson(|t| tanks_model(n, t), 0.0, 20.0, 200_000);
        let cdf = Gamma::new(n, n).unwrap().cdf(20.0);
        assert!((quad - 1.0).abs() < 1e-6, "N={n}: {quad}");
        assert!((quad - cdf).abs() < 1e-9, "N={n}: quadrature {quad} vs cdf {cdf}");
    }
}

#[test]
fn model_matches_gamma_density() {
    for n in [1.0, 2.5, 10.0, 39.27, 63.45, 300.0] {
        let g = Gamma::new(n, n).unwrap();
        for theta in [0.05, 0.5, 0.9, 1.0, 1.3, 2.0] {
            let expected = statrs::distribution::Continuous::pdf(&g, theta);
            let got = tanks_model(n, theta);
            assert!((got - expected).abs() <= 1e-9 * expected.max(1e-12), "N={n} θ={theta}: {got} vs {expected}");
        }
    }
}

#[test]
fn large_n_does_not_overflow() {
    let v = tanks_model(600.0f64, 1.0);
    assert!(v.is_finite() && v > 0.0);
    // Stirling: peak height near sqrt(N / 2π)
    assert!((v / (600.0 / std::f64::consts::TAU).sqrt() - 1.0).abs() < 1e-3);
}

#[test]
fn recovers_reference_fits_noise_free() {
    for n in [1.0, 5.0, 39.27, 63.45] {
        let (t, c) = tanks_trace(n, 30.0, 600);
        let curve = normalize_rtd(&t, &c).unwrap();
        let fit = fit_tanks(&curve);
        assert!((fit.n_star / n - 1.0).abs() < 0.01, "N={n}: {}", fit.n_star);
    }
}

#[test]
fn recovers_under_two_percent_noise() {
    for n in [1.0, 5.0, 39.27, 63.45] {
        let (t, c) = tanks_trace(n, 30.0, 600);
        let peak = c.iter().copied().fold(0.0, f64::max);
        let noise = Normal::new(0.0, 0.02 * peak).unwrap();
        let mut errs: Vec<f64> = (0..20)
            .map(|seed| {
                let mut rng = rng_from_seed(seed);
                let noisy: Vec<f64> = c.iter().map(|&v| (v + noise.sample(&mut rng)).max(0.0)).collect();
                let fit = fit_tanks(&normalize_rtd(&t, &noisy).unwrap());
                (fit.n_star / n - 1.0).abs()
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        let median = 0.5 * (errs[9] + errs[10]);
        assert!(median < 0.05, "N={n}: median relative error {median}");
    }
}

#[test]
fn noise_raises_objective() {
    let (t, c) = tanks_trace(10.0, 30.0, 400);
    let clean = composite_objective(&normalize_rtd(&t, &c).unwrap(), DEFAULT_ALPHA).f;
    let mut noisy_f: Vec<f64> = (0..20)
        .map(|seed| {
            let mut rng = rng_from_seed(100 + seed);
            let curve = normalize_rtd(&t, &c).unwrap();
            let e: Vec<f64> = curve
                .e
                .iter()
                .map(|&v| (v + rand::Rng::random_range(&mut rng, -0.05..0.05)).max(0.0))
                .collect();
            composite_objective(&RtdCurve::new(curve.theta.clone(), e).unwrap(), DEFAULT_ALPHA).f
        })
        .collect();
    noisy_f.sort_by(f64::total_cmp);
    assert!(0.5 * (noisy_f[9] + noisy_f[10]) > clean);
}

#[test]
fn resampled_curve_has_unit_moments() {
    for n in [1.0, 3.0, 10.0, 63.45] {
        let (t, c) = tanks_trace(n, 12.0, 500);
        let curve = normalize_rtd(&t, &c).unwrap();
        assert_eq!(curve.len(), RESAMPLE_POINTS);
        let (area, mean) = curve.moments();
        assert!((area - 1.0).abs() < 1e-12, "N={n}: area {area}");
        assert!((mean - 1.0).abs() < 1e-12, "N={n}: mean {mean}");
    }
}

#[test]
fn integer_gamma_is_factorial() {
    let mut fact = 1.0f64;
    for n in 1..=20u32 {
        if n > 1 {
            fact *= (n - 1) as f64;
        }
        let rel = (ln_gamma(n as f64).exp() / fact - 1.0).abs();
        assert!(rel < 1e-12, "Γ({n}): relative error {rel}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn time_scale_does_not_matter(n in 1.0f64..80.0, scale in 0.01f64..100.0) {
        let (t, c) = tanks_trace(n, 10.0, 300);
        let scaled: Vec<f64> = t.iter().map(|&v| v * scale).collect();
        let a = composite_objective(&normalize_rtd(&t, &c).unwrap(), DEFAULT_ALPHA);
        let b = composite_objective(&normalize_rtd(&scaled, &c).unwrap(), DEFAULT_ALPHA);
        prop_assert!((a.n_star - b.n_star).abs() <= 1e-6 * a.n_star);
        prop_assert!((a.f - b.f).abs() <= 1e-6 * a.f.abs().max(1.0));
    }

    #[test]
    fn objective_is_weighted_mse_minus_tanks(n in 1.0f64..80.0, alpha in 0.0f64..1000.0) {
        let (t, c) = tanks_trace(n, 10.0, 200);
        let fit = composite_objective(&normalize_rtd(&t, &c).unwrap(), alpha);
        prop_assert!(fit.mse >= 0.0);
        prop_assert_eq!(fit.f, alpha * fit.mse - fit.n_star);
    }

    #[test]
    fn normalising_twice_changes_nothing(n in 1.0f64..80.0, t_mean in 0.1f64..100.0) {
        let (t, c) = tanks_trace(n, t_mean, 250);
        let once = normalize_rtd(&t, &c).unwrap();
        let twice = normalize_rtd(&once.theta, &once.e).unwrap();
        let (area, mean) = once.moments();
        prop_assert!((area - 1.0).abs() < 1e-12 && (mean - 1.0).abs() < 1e-12);
        for (a, b) in once.e.iter().zip(&twice.e) {
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn model_curve_recovers_n(n in prop::sample::select(vec![1.0f64, 2.0, 5.0, 20.0, 100.0])) {
        let theta_max = 1.0 + 8.0 / n.sqrt();
        let theta: Vec<f64> = (0..RESAMPLE_POINTS).map(|i| theta_max * i as f64 / 99.0).collect();
        let e = theta.iter().map(|&t| tanks_model(n, t)).collect();
        let fit = fit_tanks(&RtdCurve::new(theta, e).unwrap());
        prop_assert!((fit.n_star / n - 1.0).abs() < 1e-3, "N={} got {}", n, fit.n_star);
    }
}
