mod common;

use common::{golden_section_by, poisson_pmf, random_instance, test_rng};
use ppcontrol::cost::CostSpec;
use ppcontrol::mpc::{estimate_from, ControlConfig};
use ppcontrol::point_process::{
    log_likelihood, sample_thinning, EventSequence, HawkesModel, IntensityControl, ProcessState,
};
use ppcontrol::policy::{ClampBounds, PiecewiseConstantPolicy};
use ppcontrol::rng::SeedStream;
use ppcontrol::sde::System;
use ppcontrol::variational::discrete::{free_energy, optimal_measure, tilt, variational_objective};
use ppcontrol::variational::{
    drift_policy, estimate_policy, likelihood_ratio_exponent, perbin_objective_min, sample_drift_paths,
    EstimatorConfig, LinearDriftSystem, WeightedSampleBatch,
};
use proptest::prelude::*;

const WIDE: ClampBounds = ClampBounds { min: 1e-12, max: 1e12 };

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn perbin_minimizer_matches_golden_section(a in 0.01f64..100.0, b in 0.01f64..100.0) {
        // f(c) - f(d) without cancellation
        let diff = |c: f64, d: f64| a * (c - d) - b * ((c - d) / d).ln_1p();
        let lib = perbin_objective_min(a, b, WIDE).unwrap();
        let oracle = golden_section_by(diff, 1e-6, 1e5, 1e-15);
        prop_assert!((lib - oracle).abs() <= 1e-8 * oracle.max(1.0), "{} vs {}", lib, oracle);
    }

    #[test]
    fn shift_and_scale_leave_the_policy_unchanged(seed in 0u64..500, shift in -1000i32..1000, scale in 1u32..20) {
        let (model, batch_events, costs) = toy_batch(seed);
        let origin = ProcessState::quiet(&model, 0.0);
        let edges = [0.0, 1.0, 2.0, 3.0];
        let est = |costs: Vec<f64>, gamma: f64| {
            let batch = WeightedSampleBatch::new(batch_events.clone(), costs, origin.clone(), gamma).unwrap();
            estimate_policy(&batch, &model, &edges, &EstimatorConfig::default()).unwrap().policy
        };
        let base = est(costs.clone(), 3.0);
        let shifted = est(costs.iter().map(|c| c + shift as f64).collect(), 3.0);
        let c = scale as f64;
        let scaled = est(costs.iter().map(|s| c * s).collect(), c * 3.0);
        prop_assert_eq!(&base, &shifted);
        prop_assert_eq!(&base, &scaled);
    }
}

/// Sixteen Hawkes samples on [0, 3] with small integer costs.
fn toy_batch(seed: u64) -> (HawkesModel, Vec<EventSequence>, Vec<f64>) {
    let model = HawkesModel::from_rows(vec![1.0, 0.5], &[vec![0.3, 0.1], vec![0.2, 0.2]], 1.0).unwrap();
    let events: Vec<EventSequence> = (0..16)
        .map(|m| {
            sample_thinning(
                &model,
                0.0,
                3.0,
                &SeedStream::new(seed).child(1, m),
                IntensityControl::None,
            )
            .unwrap()
        })
        .collect();
    let costs = events
        .iter()
        .map(|e| (e.count(0) as f64 - 2.0 * e.count(1) as f64).abs())
        .collect();
    (model, events, costs)
}

#[test]
fn variational_bound_holds_with_equality_at_the_tilted_measure() {
    let (lambda, gamma) = (2.5, 1.5);
    let p = poisson_pmf(lambda, 80);
    let costs: Vec<f64> = (0..p.len()).map(|n| (n as f64 - 4.0).powi(2)).collect();
    // test-side free energy by direct summation
    let z: f64 = p.iter().zip(&costs).map(|(pn, c)| pn * (-c / gamma).exp()).sum();
    let exact = -gamma * z.ln();
    let lib = free_energy(&p, &costs, gamma).unwrap();
    assert!((lib - exact).abs() < 1e-12 * exact.abs().max(1.0));
    for k in 0..60 {
        let theta = -3.0 + 0.1 * k as f64;
        let q = tilt(&p, |n| theta * n as f64).unwrap();
        let objective = variational_objective(&q, &p, &costs, gamma).unwrap();
        let direct: f64 = q
            .iter()
            .zip(&p)
            .zip(&costs)
            .filter(|((qn, _), _)| **qn > 0.0)
            .map(|((qn, pn), c)| qn * c + gamma * qn * (qn / pn).ln())
            .sum();
        assert!((objective - direct).abs() < 1e-9 * direct.abs().max(1.0));
        assert!(objective >= exact - 1e-12, "theta {theta}: {objective} < {exact}");
    }
    let q_star = optimal_measure(&p, &costs, gamma).unwrap();
    let at_optimum = variational_objective(&q_star, &p, &costs, gamma).unwrap();
    assert!((at_optimum - exact).abs() < 1e-9, "{at_optimum} vs {exact}");
}

fn counting_setup(rate: f64, horizon: f64, bins: usize, samples: usize) -> (System, ControlConfig) {
    let sys = System::counting(HawkesModel::poisson(vec![rate]).unwrap());
    let cfg = ControlConfig {
        horizon,
        bins,
        lookahead: horizon,
        samples,
        euler_step: horizon / bins as f64,
        bounds: ClampBounds::default(),
    };
    (sys, cfg)
}

#[test]
fn poisson_tilting_matches_pmf_enumeration_in_every_bin() {
    let (rate, horizon, gamma) = (2.0, 1.0, 2.0);
    let (sys, cfg) = counting_setup(rate, horizon, 4, 40_000);
    // terminal-count cost: S = N(T)
    let cost = CostSpec::custom(std::sync::Arc::new(FinalCount), gamma).unwrap();
    let start = sys.initial_state(0.0, 0.0);
    let edges = cfg.edges(0.0);
    let (policy, ess) = estimate_from(&sys, &cost, &start, horizon, &edges, &cfg, &SeedStream::new(4)).unwrap();
    let p = poisson_pmf(rate * horizon, 80);
    let num: f64 = p
        .iter()
        .enumerate()
        .map(|(n, pn)| n as f64 * pn * (-(n as f64) / gamma).exp())
        .sum();
    let den: f64 = p
        .iter()
        .enumerate()
        .map(|(n, pn)| pn * (-(n as f64) / gamma).exp())
        .sum();
    let exact = num / den / (rate * horizon);
    assert!((exact - (-1.0 / gamma).exp()).abs() < 1e-12);
    for k in 0..4 {
        assert!(
            (policy.value(k, 0) - exact).abs() < 0.03,
            "bin {k}: {} vs {exact}",
            policy.value(k, 0)
        );
    }
    assert!(ess > 0.5 * cfg.samples as f64);
}

struct FinalCount;

impl ppcontrol::cost::StateCost for FinalCount {
    fn running(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn terminal(&self, x: &[f64]) -> f64 {
        x[0]
    }
}

#[test]
fn identity_policy_has_zero_likelihood_ratio() {
    let mut rng = test_rng(31);
    for _ in 0..20 {
        let (model, seq) = random_instance(&mut rng, 3, 25, 4.0);
        let policy = PiecewiseConstantPolicy::constant(vec![0.0, 1.0, 4.0], 3, 1.0).unwrap();
        let d = likelihood_ratio_exponent(&policy, &model, &ProcessState::quiet(&model, 0.0), &seq).unwrap();
        assert_eq!(d, 0.0);
    }
}

#[test]
fn likelihood_ratio_of_scaled_poisson_is_loglik_difference() {
    let p = HawkesModel::poisson(vec![1.5, 0.5]).unwrap();
    let u = [0.7, 2.5];
    let q = HawkesModel::poisson(vec![1.5 * u[0], 0.5 * u[1]]).unwrap();
    let policy = PiecewiseConstantPolicy::new(vec![0.0, 5.0], 2, u.to_vec()).unwrap();
    for s in 0..10 {
        let seq = sample_thinning(&q, 0.0, 5.0, &SeedStream::new(s), IntensityControl::None).unwrap();
        let d = likelihood_ratio_exponent(&policy, &p, &ProcessState::quiet(&p, 0.0), &seq).unwrap();
        let diff = log_likelihood(&p, &seq).unwrap() - log_likelihood(&q, &seq).unwrap();
        assert!((d - diff).abs() < 1e-10, "{d} vs {diff}");
    }
}

#[test]
fn importance_weights_recover_uncontrolled_expectations() {
    let (mu, alpha, omega, end) = (1.0, 0.5, 1.0, 4.0);
    let model = HawkesModel::univariate(mu, alpha, omega).unwrap();
    let policy = PiecewiseConstantPolicy::new(vec![0.0, 2.0, 4.0], 1, vec![0.6, 1.8]).unwrap();
    let origin = ProcessState::quiet(&model, 0.0);
    let runs = 20_000;
    let (mut w_sum, mut wn_sum) = (0.0, 0.0);
    for s in 0..runs {
        let seq = sample_thinning(
            &model,
            0.0,
            end,
            &SeedStream::new(s),
            IntensityControl::Multiplicative(&policy),
        )
        .unwrap();
        let w = likelihood_ratio_exponent(&policy, &model, &origin, &seq).unwrap().exp();
        w_sum += w;
        wn_sum += w * seq.len() as f64;
    }
    // mean count of a Hawkes process started empty
    let decay = omega - alpha;
    let stationary = mu * omega / decay;
    let expected = stationary * end + (mu - stationary) * (1.0 - (-decay * end).exp()) / decay;
    let mean_w = w_sum / runs as f64;
    let mean_n = wn_sum / runs as f64;
    assert!((mean_w - 1.0).abs() < 0.03, "E_Q[dP/dQ] = {mean_w}");
    assert!((mean_n / expected - 1.0).abs() < 0.04, "{mean_n} vs {expected}");
}

/// First-bin control from enumerating a two-step binomial walk for
/// `dx = u dt + dw`, cost `h x0^2 + h x1^2 + x2^2`.
fn binomial_first_control(x0: f64, h: f64, gamma: f64) -> f64 {
    let step = h.sqrt();
    let (mut num, mut den) = (0.0, 0.0);
    for s1 in [-1.0, 1.0] {
        for s2 in [-1.0, 1.0] {
            let x1 = x0 + s1 * step;
            let x2 = x1 + s2 * step;
            let w = (-(h * x0 * x0 + h * x1 * x1 + x2 * x2) / gamma).exp();
            num += w * s1 * step;
            den += w;
        }
    }
    num / den / h
}

#[test]
fn drift_control_sign_matches_binomial_brute_force() {
    let sys = LinearDriftSystem::scalar(1.0);
    let cost = CostSpec::least_squares(vec![0.0], 1.0).unwrap();
    let edges = [0.0, 0.5, 1.0];
    for (x0, seed) in [(0.0, 1), (1.0, 2), (-1.0, 3)] {
        let paths = sample_drift_paths(&sys, &[x0], 0.0, 1.0, 0.5, 20_000, &SeedStream::new(seed)).unwrap();
        let costs: Vec<f64> = paths.iter().map(|p| p.state_cost(&cost).unwrap()).collect();
        let est = drift_policy(&sys, &paths, &costs, 1.0, &edges).unwrap();
        let (u, se) = (est.control(0)[0], est.std_error(0)[0]);
        let brute = binomial_first_control(x0, 0.5, 1.0);
        if x0 == 0.0 {
            assert!(brute.abs() < 1e-12);
            assert!(u.abs() < 3.0 * se, "u = {u}, se = {se}");
        } else {
            assert_eq!(u.signum(), brute.signum(), "x0 = {x0}: u = {u}, brute force {brute}");
            assert!(u.abs() > 3.0 * se);
        }
    }
}
