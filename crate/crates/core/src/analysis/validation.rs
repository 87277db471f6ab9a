use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FittedModel, LossObservation, MixtureWeights};
use crate::surrogate::{LawVariant, Surrogate};

use super::DecompositionTable;

/// Sample Pearson correlation; `None` for fewer than two points or when
/// either vector has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return None;
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    r.is_finite().then(|| r.clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationRow {
    pub domain: String,
    pub budget: f64,
    pub predicted: f64,
    /// Mean over seeds.
    pub observed: f64,
    pub relative_error: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationReport {
    pub fit_budgets: Vec<f64>,
    pub held_out_budgets: Vec<f64>,
    pub mixture: Vec<f64>,
    pub rows: Vec<ExtrapolationRow>,
    pub mean_relative_error: f64,
    /// Across all rows; absent when undefined.
    pub pearson_r: Option<f64>,
    /// Domains with no held-out observation.
    pub missing_domains: Vec<String>,
    pub flags: Vec<String>,
}

/// Compares surrogate predictions against held-out mixture runs.
///
/// Held-out observations are grouped by target and budget; their source
/// field is ignored since every run trained on the mixture `h`.
pub fn extrapolate(
    model: &FittedModel,
    held_out: &[LossObservation],
    h: &MixtureWeights,
    fit_budgets: &[f64],
) -> Result<ExtrapolationReport> {
    if held_out.is_empty() {
        return Err(Error::invalid("held-out observations", "none supplied"));
    }
    let k = model.num_domains();
    let surrogate = Surrogate::new(model, LawVariant::TransferAware)?;
    let mut groups: BTreeMap<(usize, u64), Vec<f64>> = BTreeMap::new();
    for obs in held_out {
        if obs.target() >= k {
            return Err(Error::invalid(
                "held-out observation",
                format!("target {} outside catalog of {k} domains", obs.target()),
            ));
        }
        groups
            .entry((obs.target(), obs.budget().to_bits()))
            .or_default()
            .push(obs.loss());
    }

    let names = model.catalog().names();
    let mut rows = Vec::with_capacity(groups.len());
    for ((target, bits), mut losses) in groups {
        let budget = f64::from_bits(bits);
        losses.sort_by(f64::total_cmp);
        let observed = losses[0] + losses.iter().map(|l| l - losses[0]).sum::<f64>() / losses.len() as f64;
        let predicted = surrogate.predict_loss(h, budget, target)?;
        rows.push(ExtrapolationRow {
            domain: names[target].clone(),
            budget,
            predicted,
            observed,
            relative_error: (predicted - observed).abs() / observed,
            seeds: losses.len(),
        });
    }

    let mut held_out_budgets: Vec<f64> = rows.iter().map(|r| r.budget).collect();
    held_out_budgets.sort_by(f64::total_cmp);
    held_out_budgets.dedup();
    let missing_domains: Vec<String> = names
        .iter()
        .filter(|n| !rows.iter().any(|r| &r.domain == *n))
        .cloned()
        .collect();

    let predicted: Vec<f64> = rows.iter().map(|r| r.predicted).collect();
    let observed: Vec<f64> = rows.iter().map(|r| r.observed).collect();
    let pearson_r = pearson(&predicted, &observed);
    let mut flags = Vec::new();
    if !missing_domains.is_empty() {
        flags.push(format!("{} domain(s) missing from held-out set", missing_domains.len()));
    }
    if pearson_r.is_none() {
        flags.push("correlation undefined (fewer than two rows or zero variance)".into());
    }

    Ok(ExtrapolationReport {
        fit_budgets: fit_budgets.to_vec(),
        held_out_budgets,
        mixture: h.weights().to_vec(),
        mean_relative_error: rows.iter().map(|r| r.relative_error).sum::<f64>() / rows.len() as f64,
        rows,
        pearson_r,
        missing_domains,
        flags,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub domain: String,
    pub budget_ratio: Option<f64>,
    pub loss_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioCorrelation {
    pub rows: Vec<RatioRow>,
    pub pearson_r: Option<f64>,
    /// Domains dropped because a ratio had a zero denominator.
    pub excluded: Vec<String>,
    pub flags: Vec<String>,
}

/// Correlates effective-budget gain with loss improvement between two runs.
///
/// For each domain the budget ratio is `T_eff(A) / T_eff(B)` and the loss
/// ratio is `L(B) / L(A)`, so both exceed one where run A is better.
pub fn budget_loss_correlation(
    decomp_a: &DecompositionTable,
    decomp_b: &DecompositionTable,
    losses_a: &[f64],
    losses_b: &[f64],
) -> Result<RatioCorrelation> {
    let k = decomp_a.domains.len();
    if decomp_b.domains != decomp_a.domains || losses_a.len() != k || losses_b.len() != k {
        return Err(Error::invalid(
            "correlation inputs",
            "both decompositions and loss vectors must cover the same domains",
        ));
    }
    let ratio = |num: f64, den: f64| (den != 0.0).then(|| num / den).filter(|r| r.is_finite());
    let budget_ratios: Vec<Option<f64>> = decomp_a
        .rows
        .iter()
        .zip(&decomp_b.rows)
        .map(|(a, b)| ratio(a.effective_budget, b.effective_budget))
        .collect();
    let loss_ratios: Vec<Option<f64>> = losses_a
        .iter()
        .zip(losses_b)
        .map(|(&a, &b)| ratio(b, a))
        .collect();
    Ok(correlate_ratio_options(&decomp_a.domains, &budget_ratios, &loss_ratios))
}

/// Correlation of precomputed ratio vectors.
pub fn correlate_ratios(domains: &[String], budget_ratios: &[f64], loss_ratios: &[f64]) -> Result<RatioCorrelation> {
    if budget_ratios.len() != domains.len() || loss_ratios.len() != domains.len() {
        return Err(Error::invalid("ratio vectors", "lengths must match the domain list"));
    }
    let wrap = |v: &[f64]| v.iter().map(|&x| x.is_finite().then_some(x)).collect::<Vec<_>>();
    Ok(correlate_ratio_options(domains, &wrap(budget_ratios), &wrap(loss_ratios)))
}

fn correlate_ratio_options(domains: &[String], budget: &[Option<f64>], loss: &[Option<f64>]) -> RatioCorrelation {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = Vec::new();
    let rows = domains
        .iter()
        .zip(budget.iter().zip(loss))
        .map(|(d, (&b, &l))| {
            match (b, l) {
                (Some(x), Some(y)) => {
                    xs.push(x);
                    ys.push(y);
                }
                _ => excluded.push(d.clone()),
            }
            RatioRow {
                domain: d.clone(),
                budget_ratio: b,
                loss_ratio: l,
            }
        })
        .collect();
    let pearson_r = pearson(&xs, &ys);
    let mut flags = Vec::new();
    if !excluded.is_empty() {
        flags.push(format!("{} domain(s) excluded for zero denominators", excluded.len()));
    }
    if pearson_r.is_none() {
        flags.push("correlation undefined (fewer than two domains or zero variance)".into());
    }
    RatioCorrelation {
        rows,
        pearson_r,
        excluded,
        flags,
    }
}
