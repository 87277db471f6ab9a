use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FittedModel, MixtureWeights};
use crate::surrogate::{LawVariant, Surrogate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRow {
    pub target: String,
    /// `tau_ij * h_j * T` for every source `j`, in catalog order.
    pub contributions: Vec<f64>,
    pub effective_budget: f64,
    /// `T_eff / (h_i * T)`; absent when the target gets no direct budget.
    pub amplification: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionTable {
    pub budget: f64,
    pub domains: Vec<String>,
    pub mixture: Vec<f64>,
    pub rows: Vec<DecompositionRow>,
}

/// Splits every target's effective budget into per-source contributions.
///
/// Row totals are summed in source order from the same products the
/// surrogate uses, so they equal its effective budgets bit for bit.
pub fn decompose(model: &FittedModel, h: &MixtureWeights, budget: f64) -> Result<DecompositionTable> {
    let surrogate = Surrogate::new(model, LawVariant::TransferAware)?;
    let k = model.num_domains();
    if h.len() != k {
        return Err(Error::invalid(
            "mixture weights",
            format!("{} weights for {k} domains", h.len()),
        ));
    }
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(Error::invalid("budget", format!("must be positive and finite, got {budget}")));
    }
    let names = model.catalog().names();
    let rows = (0..k)
        .map(|i| {
            let contributions = surrogate.contributions_raw(h.weights(), budget, i);
            let effective_budget: f64 = contributions.iter().sum();
            let direct = contributions[i];
            DecompositionRow {
                target: names[i].clone(),
                amplification: (direct > 0.0).then(|| effective_budget / direct),
                contributions,
                effective_budget,
            }
        })
        .collect();
    Ok(DecompositionTable {
        budget,
        domains: names.to_vec(),
        mixture: h.weights().to_vec(),
        rows,
    })
}
