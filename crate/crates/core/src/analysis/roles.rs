use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::FittedModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoleThresholds {
    /// Island when both mean transfers are at most this.
    pub island_max: f64,
    /// Hub candidates need mean outgoing transfer at least this.
    pub hub_min: f64,
}

impl Default for RoleThresholds {
    fn default() -> Self {
        RoleThresholds {
            island_max: 0.15,
            hub_min: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainRole {
    Hub,
    Island,
    /// Saturates quickly: exponent in the lowest quartile.
    Easy,
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainRoleRow {
    pub domain: String,
    pub mean_outgoing: f64,
    pub mean_incoming: f64,
    pub beta: f64,
    pub role: DomainRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainRoles {
    pub thresholds: RoleThresholds,
    /// First quartile of the exponents; at or below it a domain is easy.
    pub easy_beta_cutoff: f64,
    pub domains: Vec<DomainRoleRow>,
}

impl DomainRoles {
    pub fn role_of(&self, domain: &str) -> Option<DomainRole> {
        self.domains.iter().find(|r| r.domain == domain).map(|r| r.role)
    }

    pub fn with_role(&self, role: DomainRole) -> Vec<&str> {
        self.domains
            .iter()
            .filter(|r| r.role == role)
            .map(|r| r.domain.as_str())
            .collect()
    }
}

/// Mean of the off-diagonal values, summed in sorted order so the result
/// does not depend on domain order.
fn off_diagonal_mean(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Labels hubs, islands and fast-saturating domains from the fitted model.
///
/// Outgoing means average a column of the transfer matrix, incoming means a
/// row, both without the diagonal.
pub fn classify_domains(model: &FittedModel, thresholds: RoleThresholds) -> Result<DomainRoles> {
    let k = model.num_domains();
    let tau = model.tau();
    let outgoing = (0..k)
        .map(|j| off_diagonal_mean((0..k).filter(|&i| i != j).map(|i| tau.get(i, j)).collect()))
        .collect::<Vec<_>>();
    let incoming = (0..k)
        .map(|i| off_diagonal_mean((0..k).filter(|&j| j != i).map(|j| tau.get(i, j)).collect()))
        .collect::<Vec<_>>();
    let betas = model.params().iter().map(|p| p.beta()).collect::<Vec<_>>();
    classify_from_means(model.catalog().names(), &outgoing, &incoming, &betas, thresholds)
}

/// Role labelling from precomputed mean transfers.
///
/// Precedence is hub, island, easy. Among domains sharing the largest
/// outgoing mean the lexicographically smallest name is the hub.
pub fn classify_from_means(
    names: &[String],
    mean_outgoing: &[f64],
    mean_incoming: &[f64],
    betas: &[f64],
    thresholds: RoleThresholds,
) -> Result<DomainRoles> {
    let k = names.len();
    if k == 0 || mean_outgoing.len() != k || mean_incoming.len() != k || betas.len() != k {
        return Err(Error::invalid(
            "role inputs",
            "names, means and exponents must be non-empty and equally long",
        ));
    }
    let top = mean_outgoing.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let hub = (0..k)
        .filter(|&j| mean_outgoing[j] == top && top >= thresholds.hub_min)
        .min_by(|&a, &b| names[a].cmp(&names[b]));

    let mut sorted_betas = betas.to_vec();
    sorted_betas.sort_by(f64::total_cmp);
    let cutoff = quantile(&sorted_betas, 0.25);

    let domains = (0..k)
        .map(|j| {
            let role = if Some(j) == hub {
                DomainRole::Hub
            } else if mean_outgoing[j].max(mean_incoming[j]) <= thresholds.island_max {
                DomainRole::Island
            } else if betas[j] <= cutoff {
                DomainRole::Easy
            } else {
                DomainRole::Unlabeled
            };
            DomainRoleRow {
                domain: names[j].clone(),
                mean_outgoing: mean_outgoing[j],
                mean_incoming: mean_incoming[j],
                beta: betas[j],
                role,
            }
        })
        .collect();
    Ok(DomainRoles {
        thresholds,
        easy_beta_cutoff: cutoff,
        domains,
    })
}
