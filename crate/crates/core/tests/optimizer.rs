mod common;

use common::*;
use mixlaw::error::Error;
use mixlaw::model::{DomainCatalog, TargetWeights};
use mixlaw::optimizer::{
    heuristic_mixture, optimize_mixture, optimize_over_budgets, project_onto_floored_simplex, HeuristicStrategy,
    OptimizerConfig,
};
use mixlaw::surrogate::LawVariant;
use mixlaw::synth::{generate_world, ParameterRanges, WorldStructure};
use proptest::prelude::*;

fn config(restarts: usize) -> OptimizerConfig {
    OptimizerConfig {
        restarts,
        ..Default::default()
    }
}

fn random_model(k: usize, seed: u64) -> mixlaw::model::FittedModel {
    generate_world(k, &ParameterRanges::default(), WorldStructure::Random, seed)
        .unwrap()
        .as_model()
}

#[test]
fn never_worse_than_grid_search_on_three_domains() {
    for seed in 0..10 {
        let model = random_model(3, 100 + seed);
        let w = TargetWeights::uniform(3);
        let r = optimize_mixture(&model, 1e5, &w, &config(20), LawVariant::TransferAware).unwrap();
        let (grid, at) = grid_minimum(&model, 1e5, w.as_slice(), 0.05, 200);
        assert!(r.objective_value <= grid + 1e-6, "seed {seed}: {} vs grid {grid} at {at:?}", r.objective_value);
        assert!(r.converged);
    }
}

#[test]
fn never_worse_than_grid_search_on_four_domains() {
    for seed in 0..2 {
        let model = random_model(4, 500 + seed);
        let w = TargetWeights::new(vec![1.0, 0.5, 2.0, 1.0]).unwrap();
        let r = optimize_mixture(&model, 3e4, &w, &config(20), LawVariant::TransferAware).unwrap();
        let (grid, _) = grid_minimum(&model, 3e4, w.as_slice(), 0.05, 200);
        assert!(r.objective_value <= grid + 1e-6, "seed {seed}: {} vs {grid}", r.objective_value);
    }
}

#[test]
fn reported_losses_and_active_set_are_consistent() {
    let model = reference_model();
    let w = TargetWeights::uniform(6);
    let r = optimize_mixture(&model, REFERENCE_BUDGET, &w, &config(30), LawVariant::TransferAware).unwrap();
    let h = r.h_star.weights();
    for i in 0..6 {
        let expected = oracle_loss(&model, h, REFERENCE_BUDGET, i);
        assert!((r.per_target_losses[i] - expected).abs() <= 1e-12 * expected);
    }
    let mean: f64 = r.per_target_losses.iter().sum::<f64>() / 6.0;
    assert!((r.objective_value - mean).abs() <= 1e-12 * mean);
    for j in 0..6 {
        assert_eq!(r.active_floor_set.contains(&j), h[j] - 0.05 <= 1e-9);
    }
    assert_eq!(r.restart_statistics.restarts, 30);
    assert!(r.restart_statistics.best <= r.restart_statistics.median);
    assert!(r.restart_statistics.median <= r.restart_statistics.worst);
}

#[test]
fn identical_seed_gives_identical_result() {
    let model = random_model(5, 3);
    let w = TargetWeights::uniform(5);
    let a = optimize_mixture(&model, 5e4, &w, &config(16), LawVariant::TransferAware).unwrap();
    let b = optimize_mixture(&model, 5e4, &w, &config(16), LawVariant::TransferAware).unwrap();
    assert_eq!(a, b);
}

#[test]
fn allocation_depends_on_budget() {
    let model = reference_model();
    let w = TargetWeights::uniform(6);
    let results = optimize_over_budgets(&model, &[1e3, 1e5, 1e7], &w, &config(16), LawVariant::TransferAware).unwrap();
    assert_eq!(results.len(), 3);
    assert_ne!(results[0].h_star, results[2].h_star);
    assert!(optimize_over_budgets(&model, &[], &w, &config(4), LawVariant::TransferAware).is_err());
}

#[test]
fn invalid_inputs_are_rejected() {
    let model = random_model(3, 1);
    let w = TargetWeights::uniform(3);
    let infeasible = OptimizerConfig {
        floor: 0.34,
        ..config(4)
    };
    assert!(matches!(
        optimize_mixture(&model, 1e5, &w, &infeasible, LawVariant::TransferAware),
        Err(Error::InfeasibleFloor { .. })
    ));
    assert!(optimize_mixture(&model, -1.0, &w, &config(4), LawVariant::TransferAware).is_err());
    assert!(optimize_mixture(&model, 1e5, &TargetWeights::uniform(2), &config(4), LawVariant::TransferAware).is_err());
    assert!(optimize_mixture(&model, 1e5, &w, &config(0), LawVariant::TransferAware).is_err());
}

#[test]
fn reference_data_proportional_mixture() {
    let catalog = DomainCatalog::new(names(), Some(VOLUME_COUNTS.to_vec())).unwrap();
    let h = heuristic_mixture(&catalog, HeuristicStrategy::DataProportional, 0.05).unwrap();
    for (a, b) in h.weights().iter().zip(&DATA_PROPORTIONAL) {
        assert!((a - b).abs() < 5e-4);
    }
    let u = heuristic_mixture(&catalog, HeuristicStrategy::Uniform, 0.05).unwrap();
    assert!(u.weights().iter().all(|&x| (x - 1.0 / 6.0).abs() < 1e-15));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn returned_mixture_is_feasible(seed in 0u64..10_000, k in 2usize..7, floor in 0.0f64..0.12, budget in 1e3f64..1e6) {
        let model = random_model(k, seed);
        let cfg = OptimizerConfig { floor, ..config(6) };
        prop_assume!(floor * (k as f64) < 1.0);
        let r = optimize_mixture(&model, budget, &TargetWeights::uniform(k), &cfg, LawVariant::TransferAware).unwrap();
        let h = r.h_star.weights();
        prop_assert!((h.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(h.iter().all(|&x| x >= floor - 1e-9));
    }

    #[test]
    fn more_restarts_never_hurt(seed in 0u64..10_000, few in 1usize..6, extra in 1usize..10) {
        let model = random_model(4, seed);
        let w = TargetWeights::uniform(4);
        let a = optimize_mixture(&model, 2e4, &w, &config(few), LawVariant::TransferAware).unwrap();
        let b = optimize_mixture(&model, 2e4, &w, &config(few + extra), LawVariant::TransferAware).unwrap();
        prop_assert!(b.restart_statistics.best <= a.restart_statistics.best);
    }

    #[test]
    fn scaling_weights_keeps_argmin(seed in 0u64..10_000, factor in 0.01f64..100.0) {
        let model = random_model(3, seed);
        let w = TargetWeights::new(vec![1.0, 2.0, 0.5]).unwrap();
        let a = optimize_mixture(&model, 1e5, &w, &config(8), LawVariant::TransferAware).unwrap();
        let b = optimize_mixture(&model, 1e5, &w.scaled(factor).unwrap(), &config(8), LawVariant::TransferAware).unwrap();
        for (x, y) in a.h_star.weights().iter().zip(b.h_star.weights()) {
            prop_assert!((x - y).abs() <= 1e-9, "{:?} vs {:?}", a.h_star, b.h_star);
        }
        prop_assert!((b.objective_value - factor * a.objective_value).abs() <= 1e-9 * b.objective_value);
    }

    #[test]
    fn raising_floor_never_lowers_optimum(seed in 0u64..10_000, low in 0.0f64..0.1, gap in 0.0f64..0.1) {
        let model = random_model(4, seed);
        let w = TargetWeights::uniform(4);
        let at = |floor| {
            let cfg = OptimizerConfig { floor, ..config(8) };
            optimize_mixture(&model, 5e4, &w, &cfg, LawVariant::TransferAware).unwrap().objective_value
        };
        prop_assert!(at(low + gap) >= at(low) - 1e-12);
    }

    #[test]
    fn projection_lands_on_floored_simplex(v in prop::collection::vec(-2.0f64..2.0, 2..8), floor in 0.0f64..0.1) {
        prop_assume!(floor * (v.len() as f64) < 1.0);
        let p = project_onto_floored_simplex(&v, floor);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|&x| x >= floor - 1e-15));
    }
}
