//! Interpretive analyses built on a fitted model: where effective budget
//! comes from, which domains act as hubs or islands, how well the law
//! extrapolates, and how allocations respond to the floor and to strategy.

mod decomposition;
mod roles;
mod strategies;
mod validation;

pub use decomposition::{decompose, DecompositionRow, DecompositionTable};
pub use roles::{classify_domains, classify_from_means, DomainRole, DomainRoleRow, DomainRoles, RoleThresholds};
pub use strategies::{
    compare_strategies, floor_sweep, strategy_curves, CurvePoint, FloorSweep, FloorSweepPoint, Strategy,
    StrategyComparison, StrategyRow,
};
pub use validation::{
    budget_loss_correlation, correlate_ratios, extrapolate, pearson, ExtrapolationReport, ExtrapolationRow,
    RatioCorrelation, RatioRow,
};
