mod common;

use common::{direct_intensity, piecewise_quadrature, random_instance, test_rng};
use ppcontrol::cost::{control_cost, control_cost_density, kl_rate_cost, CostSpec};
use ppcontrol::point_process::{HawkesModel, IntensityControl, ProcessState};
use ppcontrol::policy::PiecewiseConstantPolicy;
use ppcontrol::rng::SeedStream;
use ppcontrol::sde::{simulate_trajectory, System};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #[test]
    fn density_matches_kl_form_and_is_nonnegative(u in 1e-6f64..1e6) {
        let d = control_cost_density(u);
        let kl = (u.ln() + 1.0 / u - 1.0) * u;
        prop_assert!(d >= 0.0);
        prop_assert!((d - kl).abs() <= 1e-9 * (1.0 + kl.abs()));
    }

    #[test]
    fn density_vanishes_only_at_one(u in 1e-3f64..1e3) {
        prop_assume!((u - 1.0).abs() > 1e-3);
        prop_assert!(control_cost_density(u) > 0.0);
    }
}

#[test]
fn density_at_one_is_exactly_zero() {
    assert_eq!(control_cost_density(1.0), 0.0);
}

fn random_policy(rng: &mut impl Rng, end: f64, bins: usize, dims: usize) -> PiecewiseConstantPolicy {
    let values = (0..bins * dims)
        .map(|_| (rng.random_range(-2.0f64..2.0)).exp())
        .collect();
    PiecewiseConstantPolicy::new((0..=bins).map(|k| end * k as f64 / bins as f64).collect(), dims, values).unwrap()
}

#[test]
fn control_cost_matches_quadrature() {
    let mut rng = test_rng(21);
    for _ in 0..30 {
        let (model, seq) = random_instance(&mut rng, 2, 20, 8.0);
        let policy = random_policy(&mut rng, 8.0, 5, 2);
        let mut breaks: Vec<f64> = seq.iter().map(|e| e.time).collect();
        breaks.extend_from_slice(policy.edges());
        let quad = piecewise_quadrature(
            |t| {
                let k = policy.bin_index(t).unwrap();
                (0..2)
                    .map(|i| control_cost_density(policy.value(k, i)) * direct_intensity(&model, seq.events(), i, t))
                    .sum()
            },
            0.0,
            8.0,
            &breaks,
            1e-12,
        );
        let origin = ProcessState::quiet(&model, 0.0);
        let closed = control_cost(&policy, &model, &origin, &seq).unwrap();
        assert!((closed - quad).abs() <= 1e-8 * quad.max(1.0), "{closed} vs {quad}");
        let rate = kl_rate_cost(&model, &origin, &seq, IntensityControl::Multiplicative(&policy)).unwrap();
        assert!((rate - closed).abs() <= 1e-8 * closed.max(1.0));
    }
}

#[test]
fn base_rate_kl_matches_quadrature() {
    let mut rng = test_rng(22);
    for _ in 0..20 {
        let (model, seq) = random_instance(&mut rng, 3, 30, 6.0);
        let c: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..4.0)).collect();
        let breaks: Vec<f64> = seq.iter().map(|e| e.time).collect();
        let quad = piecewise_quadrature(
            |t| {
                (0..3)
                    .map(|i| {
                        let lam = direct_intensity(&model, seq.events(), i, t);
                        let ctl = c[i] * model.mu()[i] + lam - model.mu()[i];
                        ctl * (ctl / lam).ln() - ctl + lam
                    })
                    .sum()
            },
            0.0,
            6.0,
            &breaks,
            1e-12,
        );
        let lib = kl_rate_cost(
            &model,
            &ProcessState::quiet(&model, 0.0),
            &seq,
            IntensityControl::BaseRate(&c),
        )
        .unwrap();
        assert!((lib - quad).abs() <= 1e-7 * quad.max(1.0), "{lib} vs {quad}");
    }
}

#[test]
fn identity_policy_costs_nothing() {
    let mut rng = test_rng(23);
    let (model, seq) = random_instance(&mut rng, 3, 40, 5.0);
    let policy = PiecewiseConstantPolicy::constant(vec![0.0, 2.5, 5.0], 3, 1.0).unwrap();
    assert_eq!(
        control_cost(&policy, &model, &ProcessState::quiet(&model, 0.0), &seq).unwrap(),
        0.0
    );
}

#[test]
fn least_squares_cost_of_counting_path_is_exact() {
    let model = HawkesModel::univariate(1.0, 0.4, 1.0).unwrap();
    let sys = System::counting(model);
    let traj = simulate_trajectory(
        &sys,
        &sys.initial_state(0.0, 0.0),
        10.0,
        0.7,
        IntensityControl::None,
        &SeedStream::new(3),
    )
    .unwrap();
    let a = 4.0;
    let cost = CostSpec::least_squares(vec![a], 1.0).unwrap();
    let times: Vec<f64> = traj.events().times(0).collect();
    let mut expected = 0.0;
    let mut t = 0.0;
    for (n, &s) in times.iter().enumerate() {
        expected += (n as f64 - a).powi(2) * (s - t);
        t = s;
    }
    let n = times.len() as f64;
    expected += (n - a).powi(2) * (10.0 - t) + (n - a).powi(2);
    assert!((cost.state_cost(&traj).unwrap() - expected).abs() < 1e-9 * expected);
}

#[test]
fn influence_max_rewards_positive_opinions() {
    let cost = CostSpec::influence_max(1.0).unwrap();
    assert_eq!(cost.running(&[1.0, 2.0]), -3.0);
    assert_eq!(cost.terminal(&[1.0, 2.0]), -3.0);
    assert_eq!(CostSpec::broadcast_rank(1.0).unwrap().running(&[1.0, 4.0]), 5.0);
}

#[test]
fn gamma_must_be_positive() {
    assert!(CostSpec::influence_max(0.0).is_err());
    assert!(CostSpec::least_squares(vec![], 1.0).is_err());
    assert_eq!(
        CostSpec::influence_max(2.0).unwrap().with_gamma(3.0).unwrap().gamma(),
        3.0
    );
}
