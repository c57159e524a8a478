mod common;

use common::{direct_intensity, piecewise_quadrature, random_instance, test_rng};
use ppcontrol::point_process::{
    fit_hawkes1d, fit_poisson, hawkes1d_log_likelihood, integrated_intensity, intensity_at, log_likelihood,
    sample_thinning, EventSequence, HawkesModel, IntensityControl, SearchConfig,
};
use ppcontrol::policy::PiecewiseConstantPolicy;
use ppcontrol::rng::SeedStream;
use proptest::prelude::*;

#[test]
fn integrated_intensity_matches_quadrature_on_random_instances() {
    let mut rng = test_rng(11);
    for _ in 0..40 {
        let (model, seq) = random_instance(&mut rng, 3, 25, 10.0);
        let breaks: Vec<f64> = seq.iter().map(|e| e.time).collect();
        for i in 0..3 {
            let exact = integrated_intensity(&model, &seq, i, 0.0, 10.0).unwrap();
            let quad = piecewise_quadrature(
                |t| direct_intensity(&model, seq.events(), i, t),
                0.0,
                10.0,
                &breaks,
                1e-13,
            );
            assert!((exact - quad).abs() <= 1e-9 * quad, "dim {i}: {exact} vs {quad}");
        }
    }
}

#[test]
fn intensity_at_matches_direct_sum() {
    let mut rng = test_rng(12);
    let (model, seq) = random_instance(&mut rng, 2, 30, 5.0);
    for k in 0..=50 {
        let t = 0.1 * k as f64;
        for i in 0..2 {
            let lib = intensity_at(&model, &seq, i, t).unwrap();
            let direct = direct_intensity(&model, seq.events(), i, t);
            assert!((lib - direct).abs() <= 1e-12 * direct);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn log_likelihood_is_log_intensity_sum_minus_compensator(seed in 0u64..10_000, dims in 1usize..4, n in 0usize..20) {
        let mut rng = test_rng(seed);
        let (model, seq) = random_instance(&mut rng, dims, n, 6.0);
        let breaks: Vec<f64> = seq.iter().map(|e| e.time).collect();
        let mut expected: f64 = seq.iter().map(|e| direct_intensity(&model, seq.events(), e.dim, e.time).ln()).sum();
        for i in 0..dims {
            expected -= piecewise_quadrature(|t| direct_intensity(&model, seq.events(), i, t), 0.0, 6.0, &breaks, 1e-12);
        }
        let lib = log_likelihood(&model, &seq).unwrap();
        prop_assert!((lib - expected).abs() <= 1e-8 * (1.0 + expected.abs()), "{} vs {}", lib, expected);
    }

    #[test]
    fn sampled_events_stay_in_window_and_are_ordered(seed in 0u64..1_000, start in 0.0f64..5.0, len in 0.1f64..10.0) {
        let model = HawkesModel::from_rows(vec![0.5, 1.0], &[vec![0.3, 0.2], vec![0.1, 0.4]], 1.2).unwrap();
        let seq = sample_thinning(&model, start, start + len, &SeedStream::new(seed), IntensityControl::None).unwrap();
        prop_assert!(seq.iter().all(|e| e.time >= start && e.time < start + len));
        prop_assert!(seq.events().windows(2).all(|w| w[0].time <= w[1].time));
    }
}

fn mean_rate(model: &HawkesModel, end: f64, seeds: u64, control: IntensityControl<'_>) -> Vec<f64> {
    let mut counts = vec![0.0; model.dims()];
    for s in 0..seeds {
        let seq = sample_thinning(model, 0.0, end, &SeedStream::new(s), control).unwrap();
        for (i, c) in counts.iter_mut().enumerate() {
            *c += seq.count(i) as f64;
        }
    }
    counts.iter().map(|c| c / (seeds as f64 * end)).collect()
}

#[test]
fn bivariate_stationary_rates_match_linear_solve() {
    let (mu, a, omega) = ([0.5, 1.0], [[0.2, 0.3], [0.1, 0.4]], 1.0);
    let model = HawkesModel::from_rows(mu.to_vec(), &[a[0].to_vec(), a[1].to_vec()], omega).unwrap();
    // (I - A) r = mu by Cramer's rule
    let (p, q, r, s) = (1.0 - a[0][0], -a[0][1], -a[1][0], 1.0 - a[1][1]);
    let det = p * s - q * r;
    let exact = [(mu[0] * s - q * mu[1]) / det, (p * mu[1] - r * mu[0]) / det];
    let lib = model.stationary_rates().unwrap();
    for i in 0..2 {
        assert!((lib[i] - exact[i]).abs() < 1e-12);
    }
    let empirical = mean_rate(&model, 200.0, 100, IntensityControl::None);
    for i in 0..2 {
        assert!(
            (empirical[i] / exact[i] - 1.0).abs() < 0.05,
            "dim {i}: {} vs {}",
            empirical[i],
            exact[i]
        );
    }
}

#[test]
fn multiplicative_control_scales_bin_rates() {
    let model = HawkesModel::poisson(vec![1.0]).unwrap();
    let policy = PiecewiseConstantPolicy::new(vec![0.0, 1.0, 2.0], 1, vec![0.5, 2.0]).unwrap();
    let (mut first, mut second) = (0usize, 0usize);
    let runs = 4000;
    for s in 0..runs {
        let seq = sample_thinning(
            &model,
            0.0,
            2.0,
            &SeedStream::new(s),
            IntensityControl::Multiplicative(&policy),
        )
        .unwrap();
        first += seq.between(0.0, 1.0).len();
        second += seq.between(1.0, 2.0).len();
    }
    let (m1, m2) = (first as f64 / runs as f64, second as f64 / runs as f64);
    // Poisson means 0.5 and 2; 4 standard errors
    assert!((m1 - 0.5).abs() < 4.0 * (0.5f64 / runs as f64).sqrt(), "{m1}");
    assert!((m2 - 2.0).abs() < 4.0 * (2.0f64 / runs as f64).sqrt(), "{m2}");
}

#[test]
fn base_rate_control_scales_only_the_immigrant_rate() {
    let model = HawkesModel::univariate(0.5, 0.5, 1.0).unwrap();
    let c = [2.0];
    let rate = mean_rate(&model, 200.0, 100, IntensityControl::BaseRate(&c))[0];
    // c mu / (1 - alpha / omega)
    assert!((rate / 2.0 - 1.0).abs() < 0.05, "{rate}");
}

#[test]
fn rescaled_interarrival_times_are_unit_exponential() {
    let model = HawkesModel::univariate(1.0, 0.6, 1.5).unwrap();
    let seq = sample_thinning(&model, 0.0, 1000.0, &SeedStream::new(3), IntensityControl::None).unwrap();
    let times: Vec<f64> = seq.times(0).collect();
    let mut gaps: Vec<f64> = std::iter::once(0.0)
        .chain(times.iter().copied())
        .collect::<Vec<_>>()
        .windows(2)
        .map(|w| integrated_intensity(&model, &seq, 0, w[0], w[1]).unwrap())
        .collect();
    gaps.sort_by(f64::total_cmp);
    let n = gaps.len() as f64;
    let ks = gaps
        .iter()
        .enumerate()
        .map(|(k, &g)| {
            let cdf = 1.0 - (-g).exp();
            (cdf - k as f64 / n).abs().max(((k + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value of the one-sample Kolmogorov-Smirnov statistic
    assert!(ks < 1.63 / n.sqrt(), "KS statistic {ks} with {n} events");
}

#[test]
fn poisson_fit_recovers_rates() {
    let model = HawkesModel::poisson(vec![0.5, 3.0]).unwrap();
    let seq = sample_thinning(&model, 0.0, 2000.0, &SeedStream::new(5), IntensityControl::None).unwrap();
    let fit = fit_poisson(&seq).unwrap();
    assert_eq!(fit.model.mu()[0], seq.count(0) as f64 / 2000.0);
    assert!((fit.model.mu()[0] / 0.5 - 1.0).abs() < 0.1);
    assert!((fit.model.mu()[1] / 3.0 - 1.0).abs() < 0.05);
    assert!(!fit.degenerate);
}

#[test]
fn hawkes1d_fit_recovers_parameters_and_beats_truth() {
    let (mu, alpha, omega) = (1.0, 0.5, 1.0);
    let model = HawkesModel::univariate(mu, alpha, omega).unwrap();
    let seq = sample_thinning(&model, 0.0, 3000.0, &SeedStream::new(8), IntensityControl::None).unwrap();
    let fit = fit_hawkes1d(&seq, SearchConfig::default()).unwrap();
    let times: Vec<f64> = seq.times(0).collect();
    let truth = hawkes1d_log_likelihood(&times, 0.0, 3000.0, mu, alpha, omega);
    assert!(fit.log_likelihood >= truth);
    assert!((fit.model.mu()[0] / mu - 1.0).abs() < 0.15, "mu {}", fit.model.mu()[0]);
    assert!(
        (fit.model.alpha(0, 0) / alpha - 1.0).abs() < 0.2,
        "alpha {}",
        fit.model.alpha(0, 0)
    );
    assert!(
        (fit.model.omega() / omega - 1.0).abs() < 0.25,
        "omega {}",
        fit.model.omega()
    );
}

#[test]
fn fixed_decay_fit_keeps_the_decay() {
    let model = HawkesModel::univariate(1.0, 0.5, 1.0).unwrap();
    let seq = sample_thinning(&model, 0.0, 500.0, &SeedStream::new(9), IntensityControl::None).unwrap();
    let cfg = SearchConfig {
        fixed_omega: Some(2.0),
        ..SearchConfig::default()
    };
    let fit = fit_hawkes1d(&seq, cfg).unwrap();
    assert_eq!(fit.model.omega(), 2.0);
    assert!(fit.model.alpha(0, 0) / 2.0 < 0.999);
}

#[test]
fn empty_window_fit_is_flagged_degenerate() {
    let seq = EventSequence::empty(1, 0.0, 10.0);
    let fit = fit_hawkes1d(&seq, SearchConfig::default()).unwrap();
    assert!(fit.degenerate);
    assert_eq!(fit.model.mu()[0], 0.0);
}
