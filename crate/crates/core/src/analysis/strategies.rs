use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FittedModel, MixtureWeights, TargetWeights};
use crate::optimizer::{heuristic_mixture, optimize_mixture, AllocationResult, HeuristicStrategy, OptimizerConfig};
use crate::surrogate::{LawVariant, Surrogate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorSweepPoint {
    pub floor: f64,
    pub allocation: Option<AllocationResult>,
    /// Unweighted mean of the per-target losses at the allocation.
    pub mean_loss: Option<f64>,
    /// Why this floor was skipped.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorSweep {
    pub budget: f64,
    pub variant: LawVariant,
    pub points: Vec<FloorSweepPoint>,
}

/// Reoptimizes at each floor. Infeasible floors are reported in place
/// rather than aborting the sweep.
pub fn floor_sweep(
    model: &FittedModel,
    budget: f64,
    weights: &TargetWeights,
    floors: &[f64],
    config: &OptimizerConfig,
    variant: LawVariant,
) -> Result<FloorSweep> {
    if floors.is_empty() {
        return Err(Error::invalid("floors", "at least one floor is required"));
    }
    let points = floors
        .iter()
        .map(|&floor| {
            let cfg = OptimizerConfig { floor, ..config.clone() };
            match optimize_mixture(model, budget, weights, &cfg, variant) {
                Ok(allocation) => Ok(FloorSweepPoint {
                    floor,
                    mean_loss: Some(mean(&allocation.per_target_losses)),
                    allocation: Some(allocation),
                    error: None,
                }),
                Err(e @ Error::InfeasibleFloor { .. }) => Ok(FloorSweepPoint {
                    floor,
                    allocation: None,
                    mean_loss: None,
                    error: Some(e.to_string()),
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FloorSweep {
        budget,
        variant,
        points,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    TransferAware,
    TransferNaive,
    Uniform,
    DataProportional,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::TransferAware,
        Strategy::TransferNaive,
        Strategy::Uniform,
        Strategy::DataProportional,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Strategy::TransferAware => "transfer_aware",
            Strategy::TransferNaive => "transfer_naive",
            Strategy::Uniform => "uniform",
            Strategy::DataProportional => "data_proportional",
        }
    }

    /// Mixture this strategy picks at `budget`.
    pub fn mixture(
        &self,
        model: &FittedModel,
        budget: f64,
        weights: &TargetWeights,
        config: &OptimizerConfig,
    ) -> Result<MixtureWeights> {
        let optimized = |variant| optimize_mixture(model, budget, weights, config, variant).map(|r| r.h_star);
        match self {
            Strategy::TransferAware => optimized(LawVariant::TransferAware),
            Strategy::TransferNaive => optimized(LawVariant::TransferNaive),
            Strategy::Uniform => heuristic_mixture(model.catalog(), HeuristicStrategy::Uniform, config.floor),
            Strategy::DataProportional => {
                heuristic_mixture(model.catalog(), HeuristicStrategy::DataProportional, config.floor)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub strategy: Strategy,
    pub mixture: Vec<f64>,
    pub per_domain_losses: Vec<f64>,
    pub mean_loss: f64,
    pub weighted_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyComparison {
    pub budget: f64,
    pub domains: Vec<String>,
    pub rows: Vec<StrategyRow>,
}

impl StrategyComparison {
    pub fn row(&self, strategy: Strategy) -> Option<&StrategyRow> {
        self.rows.iter().find(|r| r.strategy == strategy)
    }
}

/// Scores each strategy's mixture under the transfer-aware law.
pub fn compare_strategies(
    model: &FittedModel,
    budget: f64,
    strategies: &[Strategy],
    weights: &TargetWeights,
    config: &OptimizerConfig,
) -> Result<StrategyComparison> {
    if strategies.is_empty() {
        return Err(Error::invalid("strategies", "at least one strategy is required"));
    }
    let judge = Surrogate::new(model, LawVariant::TransferAware)?;
    let rows = strategies
        .iter()
        .map(|&strategy| {
            let h = strategy.mixture(model, budget, weights, config)?;
            let per_domain_losses = judge.predict_losses(&h, budget)?;
            let weighted_objective = judge.objective(&h, budget, weights)?.value;
            Ok(StrategyRow {
                strategy,
                mixture: h.weights().to_vec(),
                mean_loss: mean(&per_domain_losses),
                per_domain_losses,
                weighted_objective,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StrategyComparison {
        budget,
        domains: model.catalog().names().to_vec(),
        rows,
    })
}

/// One row of a long-format loss-versus-budget table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub strategy: Strategy,
    pub budget: f64,
    /// `None` marks the mean over domains.
    pub domain: Option<String>,
    pub loss: f64,
}

/// Flattens comparisons at several budgets into plot-ready rows.
pub fn strategy_curves(comparisons: &[StrategyComparison]) -> Vec<CurvePoint> {
    let mut out = Vec::new();
    for cmp in comparisons {
        for row in &cmp.rows {
            for (domain, &loss) in cmp.domains.iter().zip(&row.per_domain_losses) {
                out.push(CurvePoint {
                    strategy: row.strategy,
                    budget: cmp.budget,
                    domain: Some(domain.clone()),
                    loss,
                });
            }
            out.push(CurvePoint {
                strategy: row.strategy,
                budget: cmp.budget,
                domain: None,
                loss: row.mean_loss,
            });
        }
    }
    out
}
