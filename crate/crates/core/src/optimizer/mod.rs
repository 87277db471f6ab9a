//! Mixture allocation: minimize the weighted surrogate over the floored
//! simplex with many independent restarts, plus the heuristic baselines.

mod active_set;
mod simplex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DomainCatalog, FittedModel, MixtureWeights, TargetWeights};
use crate::surrogate::{LawVariant, Surrogate};

pub use active_set::STATIONARITY_TOLERANCE;
pub use simplex::project_onto_floored_simplex;

/// Restarts whose objectives differ by less than this are treated as tied.
pub const RESTART_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub floor: f64,
    pub restarts: usize,
    pub max_iterations: usize,
    pub convergence_tolerance: f64,
    pub constraint_tolerance: f64,
    pub rng_seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            floor: 0.05,
            restarts: 100,
            max_iterations: 1000,
            convergence_tolerance: 1e-12,
            constraint_tolerance: 1e-9,
            rng_seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self, domains: usize) -> Result<()> {
        check_floor(self.floor, domains)?;
        if self.restarts == 0 {
            return Err(Error::invalid("optimizer config", "restarts must be at least 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("optimizer config", "max_iterations must be at least 1"));
        }
        if !(self.convergence_tolerance >= 0.0 && self.constraint_tolerance >= 0.0) {
            return Err(Error::invalid("optimizer config", "tolerances must be non-negative"));
        }
        Ok(())
    }
}

fn check_floor(floor: f64, domains: usize) -> Result<()> {
    if floor.is_finite() && floor >= 0.0 && floor * (domains as f64) < 1.0 {
        Ok(())
    } else {
        Err(Error::InfeasibleFloor { floor, domains })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartStatistics {
    pub restarts: usize,
    pub best: f64,
    pub median: f64,
    pub worst: f64,
    /// Restarts that reached the stationarity tolerance.
    pub converged: usize,
    /// Index of the restart that produced `h_star`.
    pub best_restart: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub budget: f64,
    pub variant: LawVariant,
    pub h_star: MixtureWeights,
    pub objective_value: f64,
    pub per_target_losses: Vec<f64>,
    pub active_floor_set: Vec<usize>,
    /// Projected-gradient norm at `h_star`.
    pub stationarity: f64,
    /// False when the winning restart stopped on its iteration cap.
    pub converged: bool,
    /// Iterations taken by the winning restart.
    pub iterations: usize,
    pub restart_statistics: RestartStatistics,
}

/// Minimizes `sum_i w_i L_i(h, T)` over `{h_j >= floor, sum h = 1}`.
///
/// Restart `r` starts from a flat Dirichlet draw using stream `r` of the
/// configured seed, so a run with more restarts evaluates a superset of the
/// starting points of a run with fewer.
pub fn optimize_mixture(
    model: &FittedModel,
    budget: f64,
    weights: &TargetWeights,
    config: &OptimizerConfig,
    variant: LawVariant,
) -> Result<AllocationResult> {
    let k = model.num_domains();
    config.validate(k)?;
    let surrogate = Surrogate::new(model, variant)?;
    surrogate.check_weights(weights)?;
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(Error::invalid("budget", format!("must be positive and finite, got {budget}")));
    }

    let w = weights.as_slice();
    let settings = active_set::Settings {
        floor: config.floor,
        max_iterations: config.max_iterations,
        convergence_tolerance: config.convergence_tolerance,
    };
    let outcomes: Vec<active_set::LocalOutcome> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
            rng.set_stream(r as u64);
            let start = simplex::sample_interior(&mut rng, k, config.floor);
            active_set::minimize(
                |h, g| surrogate.objective_raw(h, budget, w, g),
                |h, out| surrogate.objective_hessian_raw(h, budget, w, out),
                start,
                &settings,
            )
        })
        .collect();

    let mut best = 0;
    for (r, out) in outcomes.iter().enumerate().skip(1) {
        if out.value < outcomes[best].value - RESTART_TIE_TOLERANCE {
            best = r;
        }
    }
    let mut values: Vec<f64> = outcomes.iter().map(|o| o.value).collect();
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let median = if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    };
    let statistics = RestartStatistics {
        restarts: n,
        best: values[0],
        median,
        worst: values[n - 1],
        converged: outcomes.iter().filter(|o| o.converged).count(),
        best_restart: best,
    };

    let winner = &outcomes[best];
    let mut h = winner.h.clone();
    simplex::tidy(&mut h, config.floor);
    let mut gradient = vec![0.0; k];
    let objective_value = surrogate.objective_raw(&h, budget, w, &mut gradient);
    let stationarity = simplex::stationarity(&h, &gradient, config.floor);
    let per_target_losses = (0..k).map(|i| surrogate.loss_raw(&h, budget, i)).collect();
    let active_floor_set = h
        .iter()
        .enumerate()
        .filter(|(_, &x)| x - config.floor <= config.constraint_tolerance)
        .map(|(j, _)| j)
        .collect();

    Ok(AllocationResult {
        budget,
        variant,
        h_star: MixtureWeights::new(h, config.floor)?,
        objective_value,
        per_target_losses,
        active_floor_set,
        stationarity,
        converged: winner.converged,
        iterations: winner.iterations,
        restart_statistics: statistics,
    })
}

/// One allocation per budget, each with the same configuration and seed.
pub fn optimize_over_budgets(
    model: &FittedModel,
    budgets: &[f64],
    weights: &TargetWeights,
    config: &OptimizerConfig,
    variant: LawVariant,
) -> Result<Vec<AllocationResult>> {
    if budgets.is_empty() {
        return Err(Error::invalid("budgets", "at least one budget is required"));
    }
    budgets
        .iter()
        .map(|&t| optimize_mixture(model, t, weights, config, variant))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeuristicStrategy {
    Uniform,
    DataProportional,
}

/// Uniform or volume-proportional mixture.
///
/// Returned unchanged when it already satisfies the floor. Otherwise the
/// entries below the floor are raised to it and the deficit is taken from
/// the above-floor entries in proportion to their excess.
pub fn heuristic_mixture(
    catalog: &DomainCatalog,
    strategy: HeuristicStrategy,
    floor: f64,
) -> Result<MixtureWeights> {
    let k = catalog.len();
    check_floor(floor, k)?;
    let raw = match strategy {
        HeuristicStrategy::Uniform => vec![1.0 / k as f64; k],
        HeuristicStrategy::DataProportional => {
            let counts = catalog.volume_counts().ok_or(Error::MissingCounts)?;
            let total: u64 = counts.iter().sum();
            counts.iter().map(|&c| c as f64 / total as f64).collect()
        }
    };
    Ok(MixtureWeights::new(redistribute_to_floor(raw, floor), floor)?)
}

/// Raises sub-floor entries to `floor`, shrinking the excess of the others
/// proportionally so the total stays one.
pub fn redistribute_to_floor(mut h: Vec<f64>, floor: f64) -> Vec<f64> {
    let deficit: f64 = h.iter().filter(|&&x| x < floor).map(|x| floor - x).sum();
    if deficit == 0.0 {
        return h;
    }
    let excess: f64 = h.iter().filter(|&&x| x >= floor).map(|x| x - floor).sum();
    let keep = 1.0 - deficit / excess;
    for x in h.iter_mut() {
        *x = if *x < floor { floor } else { floor + (*x - floor) * keep };
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FitDiagnostics, ScalingParams, TransferMatrix};

    fn symmetric_pair() -> FittedModel {
        let p = ScalingParams::new(0.01, 5.0, 0.5).unwrap();
        FittedModel::new(
            DomainCatalog::from_names(["a", "b"]).unwrap(),
            vec![p, p],
            TransferMatrix::identity(2),
            FitDiagnostics::default(),
        )
        .unwrap()
    }

    #[test]
    fn identical_domains_split_evenly() {
        let config = OptimizerConfig {
            restarts: 8,
            ..Default::default()
        };
        let r = optimize_mixture(
            &symmetric_pair(),
            1e5,
            &TargetWeights::uniform(2),
            &config,
            LawVariant::TransferAware,
        )
        .unwrap();
        assert!((r.h_star.weights()[0] - 0.5).abs() < 1e-7, "{:?}", r.h_star);
        assert!(r.converged);
        assert!(r.active_floor_set.is_empty());
    }

    #[test]
    fn infeasible_floor_is_rejected() {
        let config = OptimizerConfig {
            floor: 0.5,
            ..Default::default()
        };
        let err = optimize_mixture(
            &symmetric_pair(),
            1e5,
            &TargetWeights::uniform(2),
            &config,
            LawVariant::TransferAware,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InfeasibleFloor { .. }));
    }

    #[test]
    fn vertex_counts_project_to_floor() {
        let catalog = DomainCatalog::new(
            vec!["a".into(), "b".into(), "c".into()],
            Some(vec![1, 0, 0]),
        )
        .unwrap();
        let h = heuristic_mixture(&catalog, HeuristicStrategy::DataProportional, 0.05).unwrap();
        let expected = [0.9, 0.05, 0.05];
        for (a, b) in h.weights().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn feasible_heuristics_are_untouched() {
        let catalog = DomainCatalog::new(
            vec!["a".into(), "b".into()],
            Some(vec![3, 1]),
        )
        .unwrap();
        let h = heuristic_mixture(&catalog, HeuristicStrategy::DataProportional, 0.05).unwrap();
        assert_eq!(h.weights(), &[0.75, 0.25]);
        let u = heuristic_mixture(&catalog, HeuristicStrategy::Uniform, 0.0).unwrap();
        assert_eq!(u.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn missing_counts_fail_for_data_proportional() {
        let catalog = DomainCatalog::from_names(["a", "b"]).unwrap();
        assert_eq!(
            heuristic_mixture(&catalog, HeuristicStrategy::DataProportional, 0.0),
            Err(Error::MissingCounts)
        );
    }
}
