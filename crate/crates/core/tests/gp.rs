use std::f64::consts::{PI, TAU};

use coilopt::gp::*;
use coilopt::optim::rng_from_seed;
use coilopt::GpModel64;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::Rng;

fn polar_gram(angles: &[f64], tau: f64) -> DMatrix<f64> {
    let k = KernelSpec::polar(tau);
    DMatrix::from_fn(angles.len(), angles.len(), |i, j| k.eval(&[angles[i]], &[angles[j]]))
}

fn min_eigenvalue(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

#[test]
fn polar_covariance_is_psd_over_random_sets() {
    let mut rng = rng_from_seed(11);
    for _ in 0..200 {
        let n = rng.random_range(1..=20);
        let tau = rng.random_range(4.0..=10.0);
        let angles: Vec<f64> = (0..n).map(|_| rng.random_range(-TAU..2.0 * TAU)).collect();
        let lam = min_eigenvalue(polar_gram(&angles, tau));
        assert!(lam >= -1e-8, "τ={tau} n={n}: λ_min={lam}");
    }
}

#[test]
fn polar_tau_below_four_is_rejected() {
    assert!(polar_kernel(0.0, 1.0, 3.99).is_err());
    assert!(GpModel64::new(KernelSpec::polar(2.0), vec![vec![0.0]], vec![1.0], 0.0, 0.0).is_err());
}

#[test]
fn polar_distance_hand_values() {
    assert_eq!(polar_distance(0.0, PI / 2.0), PI / 2.0);
    assert!((polar_distance(0.1, TAU - 0.1) - 0.2).abs() < 1e-12);
    assert_eq!(polar_kernel(0.0, PI, 4.0).unwrap(), 0.0);
    assert!((polar_kernel(0.0, PI / 2.0, 4.0).unwrap() - 0.1875).abs() < 1e-15);
}

#[test]
fn ard_hand_value() {
    let spec = KernelSpec::ard(vec![1.0], 1.0);
    assert!((ard_se_kernel(&[0.0], &[1.0], &spec).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
    assert!(ard_se_kernel(&[0.0, 1.0], &[1.0], &spec).is_err());
}

#[test]
fn warm_start_is_never_worse() {
    let mut rng = rng_from_seed(3);
    let x: Vec<Vec<f64>> = (0..25).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
    let y: Vec<f64> = x.iter().map(|p| (3.0 * p[0]).sin() + 0.1 * p[1]).collect();
    let bounds = [(0.0, 1.0), (0.0, 1.0)];
    for ls in [0.05, 0.3, 5.0] {
        let start = HyperParameters {
            kind: KernelKind::ArdSquaredExponential,
            lengthscales: vec![ls, ls],
            signal_variance: 1.0,
            noise_variance: 1e-4,
            tau: None,
        };
        let at_start = FittedGp::from_hyper(&x, &y, &bounds, start.clone()).unwrap();
        let settings = FitSettings {
            restarts: 0,
            ..FitSettings::default()
        };
        let fitted = fit_hyperparameters(&x, &y, KernelKind::ArdSquaredExponential, &bounds, &settings, 0, Some(&start))
            .unwrap();
        assert!(
            fitted.log_marginal_likelihood >= at_start.log_marginal_likelihood - 1e-9,
            "ℓ₀={ls}: {} < {}",
            fitted.log_marginal_likelihood,
            at_start.log_marginal_likelihood
        );
    }
}

#[test]
fn single_precision_interpolates() {
    let x: Vec<Vec<f32>> = (0..6).map(|i| vec![i as f32 * 0.2]).collect();
    let y: Vec<f32> = x.iter().map(|p| p[0].cos()).collect();
    let m = coilopt::GpModel32::new(KernelSpec::ard(vec![0.5], 1.0), x.clone(), y.clone(), 0.0, 0.0).unwrap();
    for (xi, yi) in x.iter().zip(&y) {
        assert!((m.mean_at(xi) - yi).abs() < 1e-3);
    }
}

fn well_separated(angles: &[f64], gap: f64) -> bool {
    angles
        .iter()
        .enumerate()
        .all(|(i, a)| angles[..i].iter().all(|b| polar_distance(*a, *b) > gap))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn polar_kernel_is_periodic_and_symmetric(a in -20.0f64..20.0, b in -20.0f64..20.0, tau in 4.0f64..10.0) {
        let k = polar_kernel(a, b, tau).unwrap();
        prop_assert_eq!(k, polar_kernel(b, a, tau).unwrap());
        prop_assert!((0.0..=1.0).contains(&k));
        // 2π shifts the input by a rounded amount, so agreement is to rounding
        prop_assert!((k - polar_kernel(a + TAU, b, tau).unwrap()).abs() <= 1e-12);
        prop_assert!((polar_distance(a, b) - polar_distance(a - TAU, b)).abs() <= 1e-12);
    }

    #[test]
    fn ard_kernel_is_symmetric(
        a in prop::collection::vec(-5.0f64..5.0, 3),
        b in prop::collection::vec(-5.0f64..5.0, 3),
        ls in prop::collection::vec(0.05f64..5.0, 3),
        s in 0.1f64..10.0,
    ) {
        let spec = KernelSpec::ard(ls, s);
        let k = ard_se_kernel(&a, &b, &spec).unwrap();
        prop_assert_eq!(k, ard_se_kernel(&b, &a, &spec).unwrap());
        prop_assert!(k <= s && k >= 0.0);
        prop_assert_eq!(ard_se_kernel(&a, &a, &spec).unwrap(), s);
    }

    #[test]
    fn noiseless_ard_interpolates(
        gaps in prop::collection::vec(0.6f64..3.0, 1..12),
        ls in 0.02f64..0.5,
        s in 0.5f64..4.0,
        seed in 0u64..1000,
    ) {
        // spacing in lengthscales; much tighter designs are singular in f64
        let mut xs = vec![0.0];
        for g in &gaps {
            xs.push(xs.last().unwrap() + g * ls);
        }
        let mut rng = rng_from_seed(seed);
        let x: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v]).collect();
        let y: Vec<f64> = xs.iter().map(|_| rng.random_range(-3.0..3.0)).collect();
        let m = GpModel64::with_mean_prior(KernelSpec::ard(vec![ls], s), x.clone(), y.clone(), 0.0).unwrap();
        let scale = y.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for (xi, yi) in x.iter().zip(&y) {
            let (mu, sd) = m.predict_one(xi);
            prop_assert!((mu - yi).abs() <= 1e-6 * scale, "{} vs {}", mu, yi);
            prop_assert!(sd * sd <= 1e-8 * s);
        }
    }

    #[test]
    fn noiseless_polar_interpolates(
        angles in prop::collection::vec(0.0f64..TAU, 2..10),
        tau in 4.0f64..10.0,
        seed in 0u64..1000,
    ) {
        prop_assume!(well_separated(&angles, 0.1));
        let mut rng = rng_from_seed(seed);
        let x: Vec<Vec<f64>> = angles.iter().map(|&v| vec![v]).collect();
        let y: Vec<f64> = angles.iter().map(|_| rng.random_range(1.0..3.0)).collect();
        let m = GpModel64::with_mean_prior(KernelSpec::polar(tau), x.clone(), y.clone(), 0.0).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            let (mu, sd) = m.predict_one(xi);
            prop_assert!((mu - yi).abs() <= 1e-6 * yi.abs(), "{} vs {}", mu, yi);
            prop_assert!(sd * sd <= 1e-8);
        }
    }

    #[test]
    fn posterior_std_is_nonnegative(q in prop::collection::vec(-1.0f64..2.0, 1..20)) {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0]).collect();
        let y: Vec<f64> = x.iter().map(|p| p[0] * p[0]).collect();
        let m = GpModel64::new(KernelSpec::ard(vec![0.3], 1.0), x, y, 1e-6, 0.0).unwrap();
        let query: Vec<Vec<f64>> = q.iter().map(|&v| vec![v]).collect();
        let post = gp_posterior(&m, &query).unwrap();
        prop_assert!(post.stds.iter().all(|&s| s >= 0.0 && s <= 1.0 + 1e-12));
    }
}
