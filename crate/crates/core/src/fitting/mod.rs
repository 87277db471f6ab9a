//! Two-stage estimation of the transfer-aware law.
//!
//! Stage one fits `(E, C, beta)` per domain from self-domain runs with a
//! bounded nonlinear least-squares solver. Stage two holds each target's law
//! fixed and fits every directed `tau_ij` as an independent scalar problem in
//! `log tau`. Residuals are taken against per-budget mean losses so each
//! budget level counts once regardless of how many seeds were run.

mod least_squares;
mod scalar;

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    DomainCatalog, FitDiagnostics, FittedModel, LossObservation, ScalingParams, SelfFitDiagnostics,
    TransferFitDiagnostics, TransferFitStatus, TransferMatrix, BETA_MAX, BETA_MIN,
};
use least_squares::{LmOptions, Residuals};

/// Absolute tolerance on `log tau` for the transfer line search.
pub const LOG_TAU_TOLERANCE: f64 = 1e-8;
const TAU_GRID_POINTS: usize = 64;
const LOG_C_MAX: f64 = 700.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub e_lower: f64,
    pub c_lower: f64,
    pub beta_bounds: (f64, f64),
    pub tau_bounds: (f64, f64),
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
    /// Initial exponents; one local solve per entry.
    pub multistart_betas: Vec<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            e_lower: 0.0,
            c_lower: 1e-12,
            beta_bounds: (BETA_MIN, BETA_MAX),
            tau_bounds: (1e-6, 1.0),
            max_iterations: 500,
            gradient_tolerance: 1e-10,
            step_tolerance: 1e-12,
            multistart_betas: vec![0.1, 0.3, 0.5, 0.8, 1.2],
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid("fit config", reason));
        if !(self.e_lower >= 0.0 && self.e_lower.is_finite()) {
            return bad(format!("e_lower must be >= 0, got {}", self.e_lower));
        }
        if !(self.c_lower > 0.0 && self.c_lower.is_finite()) {
            return bad(format!("c_lower must be > 0, got {}", self.c_lower));
        }
        let (b_lo, b_hi) = self.beta_bounds;
        if !(BETA_MIN <= b_lo && b_lo < b_hi && b_hi <= BETA_MAX) {
            return bad(format!("beta bounds ({b_lo}, {b_hi}) must be ordered within [{BETA_MIN}, {BETA_MAX}]"));
        }
        let (t_lo, t_hi) = self.tau_bounds;
        if !(0.0 < t_lo && t_lo < t_hi && t_hi <= 1.0) {
            return bad(format!("tau bounds ({t_lo}, {t_hi}) must be ordered within (0, 1]"));
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive".into());
        }
        if !(self.gradient_tolerance > 0.0 && self.step_tolerance > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.multistart_betas.is_empty() {
            return bad("at least one multistart beta is required".into());
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Budget-level aggregation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetLevel {
    pub budget: f64,
    pub mean_loss: f64,
    pub seeds: usize,
}

/// Observations collapsed to one mean loss per distinct budget, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualAggregation {
    levels: Vec<BudgetLevel>,
    max_loss: f64,
}

impl ResidualAggregation {
    /// Independent of the input order.
    pub fn from_observations<'a>(observations: impl IntoIterator<Item = &'a LossObservation>) -> Self {
        // Positive finite budgets order the same as their bit patterns.
        let mut groups: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for obs in observations {
            groups.entry(obs.budget().to_bits()).or_default().push(obs.loss());
        }
        let mut max_loss = 0.0f64;
        let levels = groups
            .into_iter()
            .map(|(bits, mut losses)| {
                losses.sort_by(f64::total_cmp);
                max_loss = max_loss.max(*losses.last().unwrap());
                BudgetLevel {
                    budget: f64::from_bits(bits),
                    mean_loss: shifted_mean(&losses),
                    seeds: losses.len(),
                }
            })
            .collect();
        ResidualAggregation { levels, max_loss }
    }

    pub fn levels(&self) -> &[BudgetLevel] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Largest raw (unaggregated) loss.
    pub fn max_raw_loss(&self) -> f64 {
        self.max_loss
    }
}

/// Mean computed relative to the first value, exact when all values agree.
fn shifted_mean(values: &[f64]) -> f64 {
    let pivot = values[0];
    pivot + values.iter().map(|v| v - pivot).sum::<f64>() / values.len() as f64
}

// ---------------------------------------------------------------------------
// Self-domain fit
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct SelfFit {
    pub params: ScalingParams,
    /// Sum of squared residuals over budget-level means.
    pub rss: f64,
    pub converged: bool,
    pub iterations: usize,
    pub budget_levels: usize,
    /// Final RSS of every multistart solve, in `multistart_betas` order.
    pub start_rss: Vec<f64>,
}

struct SelfLaw {
    log_budget: Vec<f64>,
    mean_loss: Vec<f64>,
}

// x = [E, ln C, beta]
impl Residuals for SelfLaw {
    fn num_residuals(&self) -> usize {
        self.mean_loss.len()
    }

    fn residuals(&self, x: &[f64], out: &mut [f64]) {
        for (k, (&ld, &y)) in self.log_budget.iter().zip(&self.mean_loss).enumerate() {
            out[k] = y - x[0] - (x[1] - x[2] * ld).exp();
        }
    }

    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        for (k, &ld) in self.log_budget.iter().enumerate() {
            let g = (x[1] - x[2] * ld).exp();
            out[3 * k] = -1.0;
            out[3 * k + 1] = -g;
            out[3 * k + 2] = g * ld;
        }
    }
}

/// Fits `(E, C, beta)` for one domain from its self-domain runs.
pub fn fit_self(observations: &[LossObservation], config: &FitConfig) -> Result<SelfFit> {
    config.validate()?;
    let Some(first) = observations.first() else {
        return Err(Error::InsufficientData {
            domain: "unknown domain".into(),
            reason: "no observations".into(),
        });
    };
    let domain = first.target();
    if let Some(bad) = observations
        .iter()
        .find(|o| o.target() != domain || o.source() != domain)
    {
        return Err(Error::invalid(
            "self-fit observations",
            format!(
                "expected target == source == {domain}, found target {} source {}",
                bad.target(),
                bad.source()
            ),
        ));
    }
    let agg = ResidualAggregation::from_observations(observations);
    fit_self_levels(&agg, config, &format!("domain {domain}"))
}

fn fit_self_levels(agg: &ResidualAggregation, config: &FitConfig, label: &str) -> Result<SelfFit> {
    if agg.len() < 3 {
        return Err(Error::InsufficientData {
            domain: label.to_string(),
            reason: format!("{} distinct budget levels, at least 3 required", agg.len()),
        });
    }
    let law = SelfLaw {
        log_budget: agg.levels().iter().map(|l| l.budget.ln()).collect(),
        mean_loss: agg.levels().iter().map(|l| l.mean_loss).collect(),
    };
    let (y_min, y_max) = law
        .mean_loss
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &y| (lo.min(y), hi.max(y)));
    if y_max - y_min <= 1e-12 * y_max {
        return Err(Error::DegenerateFit {
            domain: label.to_string(),
            reason: "losses do not vary with budget; exponent is unidentifiable".into(),
        });
    }

    let (b_lo, b_hi) = config.beta_bounds;
    let lower = [config.e_lower, config.c_lower.ln(), b_lo];
    let upper = [f64::INFINITY, LOG_C_MAX, b_hi];
    let options = LmOptions {
        max_iterations: config.max_iterations,
        gradient_tolerance: config.gradient_tolerance,
        step_tolerance: config.step_tolerance,
    };

    let e0 = (0.9 * y_min).max(config.e_lower);
    let anchor_log_d = law.log_budget[0];
    let anchor_gap = law.mean_loss[0] - e0;

    let mut best: Option<least_squares::LmOutcome> = None;
    let mut start_rss = Vec::with_capacity(config.multistart_betas.len());
    for &beta_start in &config.multistart_betas {
        let beta0 = beta_start.clamp(b_lo, b_hi);
        let log_c0 = if anchor_gap > 0.0 {
            (anchor_gap.ln() + beta0 * anchor_log_d).max(lower[1])
        } else {
            lower[1]
        };
        let outcome = least_squares::minimize(&law, &[e0, log_c0, beta0], &lower, &upper, &options);
        start_rss.push(outcome.rss);
        if best.as_ref().is_none_or(|b| outcome.rss < b.rss) {
            best = Some(outcome);
        }
    }
    let best = best.expect("multistart list is non-empty");
    let c = best.x[1].exp().max(config.c_lower);
    let params = ScalingParams::new(best.x[0].max(0.0), c, best.x[2].clamp(b_lo, b_hi))?;
    Ok(SelfFit {
        params,
        rss: best.rss,
        converged: best.converged,
        iterations: best.iterations,
        budget_levels: agg.len(),
        start_rss,
    })
}

// ---------------------------------------------------------------------------
// Directed transfer fit
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct TransferFit {
    pub tau: f64,
    pub rss: f64,
    pub status: TransferFitStatus,
    pub budget_levels: usize,
}

struct TransferObjective<'a> {
    levels: &'a [BudgetLevel],
    params: ScalingParams,
}

impl TransferObjective<'_> {
    fn residual_and_slope(&self, log_tau: f64, level: &BudgetLevel) -> (f64, f64) {
        let g = self.params.c() * (-self.params.beta() * (log_tau + level.budget.ln())).exp();
        (level.mean_loss - self.params.e() - g, self.params.beta() * g)
    }

    /// Mean squared residual at `log tau`.
    fn value(&self, log_tau: f64) -> f64 {
        self.levels
            .iter()
            .map(|l| self.residual_and_slope(log_tau, l).0.powi(2))
            .sum::<f64>()
            / self.levels.len() as f64
    }

    fn derivative(&self, log_tau: f64) -> f64 {
        2.0 * self
            .levels
            .iter()
            .map(|l| {
                let (r, j) = self.residual_and_slope(log_tau, l);
                r * j
            })
            .sum::<f64>()
            / self.levels.len() as f64
    }

    fn gauss_newton_step(&self, log_tau: f64) -> f64 {
        let (num, den) = self.levels.iter().fold((0.0, 0.0), |(n, d), l| {
            let (r, j) = self.residual_and_slope(log_tau, l);
            (n + r * j, d + j * j)
        });
        if den > 0.0 {
            -num / den
        } else {
            0.0
        }
    }
}

/// Fits `tau_ij` with the target's self law held fixed.
pub fn fit_transfer(
    observations: &[LossObservation],
    target_params: &ScalingParams,
    config: &FitConfig,
) -> Result<TransferFit> {
    config.validate()?;
    let Some(first) = observations.first() else {
        return Err(Error::InsufficientData {
            domain: "unknown pair".into(),
            reason: "no transfer observations".into(),
        });
    };
    let (target, source) = (first.target(), first.source());
    if target == source {
        return Err(Error::invalid(
            "transfer-fit observations",
            format!("self-domain run {target}<-{source} passed to transfer fit"),
        ));
    }
    if let Some(bad) = observations
        .iter()
        .find(|o| o.target() != target || o.source() != source)
    {
        return Err(Error::invalid(
            "transfer-fit observations",
            format!(
                "mixed pairs: expected {target}<-{source}, found {}<-{}",
                bad.target(),
                bad.source()
            ),
        ));
    }
    let agg = ResidualAggregation::from_observations(observations);
    Ok(fit_transfer_levels(&agg, target_params, config))
}

fn fit_transfer_levels(agg: &ResidualAggregation, params: &ScalingParams, config: &FitConfig) -> TransferFit {
    let (tau_lo, tau_hi) = config.tau_bounds;
    let (u_lo, u_hi) = (tau_lo.ln(), tau_hi.ln());
    let objective = TransferObjective {
        levels: agg.levels(),
        params: *params,
    };
    let n = agg.len() as f64;

    if agg.max_raw_loss() <= params.e() {
        return TransferFit {
            tau: tau_hi,
            rss: objective.value(u_hi) * n,
            status: TransferFitStatus::Saturated,
            budget_levels: agg.len(),
        };
    }

    let (mut u, mut fu) = scalar::bracketed_minimize(
        |u| objective.value(u),
        u_lo,
        u_hi,
        TAU_GRID_POINTS,
        LOG_TAU_TOLERANCE,
    );
    for _ in 0..30 {
        let step = objective.gauss_newton_step(u);
        let candidate = (u + step).clamp(u_lo, u_hi);
        let fc = objective.value(candidate);
        if !(fc < fu) {
            break;
        }
        let moved = (candidate - u).abs();
        u = candidate;
        fu = fc;
        if moved < 1e-15 {
            break;
        }
    }

    let scale = agg.levels().iter().map(|l| l.mean_loss.powi(2)).sum::<f64>() / n;
    let slope_tol = 1e-10 * scale;
    let (tau, status) = if u >= u_hi {
        let status = if objective.derivative(u_hi) < -slope_tol {
            TransferFitStatus::ClippedAtUpper
        } else {
            TransferFitStatus::Fitted
        };
        (tau_hi, status)
    } else if u <= u_lo {
        let status = if objective.derivative(u_lo) > slope_tol {
            TransferFitStatus::AtLowerBound
        } else {
            TransferFitStatus::Fitted
        };
        (tau_lo, status)
    } else {
        (u.exp().clamp(tau_lo, tau_hi), TransferFitStatus::Fitted)
    };

    TransferFit {
        tau,
        rss: fu * n,
        status,
        budget_levels: agg.len(),
    }
}

// ---------------------------------------------------------------------------
// Full model
// ---------------------------------------------------------------------------

/// Fits all `K` self laws, then every directed pair that has observations.
///
/// Pairs without observations get the lower tau bound and a
/// [`TransferFitStatus::Missing`] diagnostic. A domain without self-domain
/// runs is fatal since its whole row depends on its self law.
pub fn fit_all(
    observations: &[LossObservation],
    catalog: &DomainCatalog,
    config: &FitConfig,
) -> Result<FittedModel> {
    config.validate()?;
    let k = catalog.len();
    let mut groups: BTreeMap<(usize, usize), Vec<LossObservation>> = BTreeMap::new();
    for obs in observations {
        if obs.target() >= k || obs.source() >= k {
            return Err(Error::invalid(
                "observation",
                format!(
                    "domain index {}<-{} outside catalog of {k} domains",
                    obs.target(),
                    obs.source()
                ),
            ));
        }
        groups.entry((obs.target(), obs.source())).or_default().push(*obs);
    }

    let self_fits: Vec<Result<SelfFit>> = (0..k)
        .into_par_iter()
        .map(|i| {
            let name = catalog.name(i);
            let obs = groups.get(&(i, i)).ok_or_else(|| Error::InsufficientData {
                domain: name.to_string(),
                reason: "no self-domain observations".into(),
            })?;
            fit_self_levels(&ResidualAggregation::from_observations(obs), config, name)
        })
        .collect();
    let self_fits = self_fits.into_iter().collect::<Result<Vec<_>>>()?;

    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let transfer_fits: Vec<(f64, TransferFitDiagnostics)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let fit = match groups.get(&(i, j)) {
                Some(obs) => fit_transfer_levels(
                    &ResidualAggregation::from_observations(obs),
                    &self_fits[i].params,
                    config,
                ),
                None => TransferFit {
                    tau: config.tau_bounds.0,
                    rss: 0.0,
                    status: TransferFitStatus::Missing,
                    budget_levels: 0,
                },
            };
            let diag = TransferFitDiagnostics {
                target: i,
                source: j,
                rss: fit.rss,
                status: fit.status,
                budget_levels: fit.budget_levels,
            };
            (fit.tau, diag)
        })
        .collect();

    let mut rows = vec![vec![0.0; k]; k];
    for (i, row) in rows.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for (tau, diag) in &transfer_fits {
        rows[diag.target][diag.source] = *tau;
    }
    let diagnostics = FitDiagnostics {
        self_fits: self_fits
            .iter()
            .enumerate()
            .map(|(i, f)| SelfFitDiagnostics {
                domain: i,
                rss: f.rss,
                converged: f.converged,
                iterations: f.iterations,
                budget_levels: f.budget_levels,
            })
            .collect(),
        transfer_fits: transfer_fits.into_iter().map(|(_, d)| d).collect(),
    };
    FittedModel::new(
        catalog.clone(),
        self_fits.iter().map(|f| f.params).collect(),
        TransferMatrix::new(rows)?,
        diagnostics,
    )
}
