//! Closed-form evaluation of the mixture loss law and its gradient in `h`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FittedModel, MixtureWeights, TargetWeights, BETA_MAX, BETA_MIN};

/// Which special case of the mixture law to evaluate.
///
/// `TransferNaive` drops every off-diagonal transfer term. `SharedExponent`
/// additionally replaces each domain's exponent with a common value while
/// keeping its own floor and scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawVariant {
    TransferAware,
    TransferNaive,
    SharedExponent(f64),
}

impl LawVariant {
    pub fn shared_exponent(beta: f64) -> Result<Self> {
        let v = LawVariant::SharedExponent(beta);
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LawVariant::SharedExponent(beta) if !(BETA_MIN..=BETA_MAX).contains(&beta) => Err(Error::invalid(
                "law variant",
                format!("shared exponent {beta} outside [{BETA_MIN}, {BETA_MAX}]"),
            )),
            _ => Ok(()),
        }
    }

    pub fn uses_transfer(&self) -> bool {
        matches!(self, LawVariant::TransferAware)
    }
}

impl fmt::Display for LawVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LawVariant::TransferAware => f.write_str("aware"),
            LawVariant::TransferNaive => f.write_str("naive"),
            LawVariant::SharedExponent(beta) => write!(f, "shared:{beta}"),
        }
    }
}

impl FromStr for LawVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aware" => Ok(LawVariant::TransferAware),
            "naive" => Ok(LawVariant::TransferNaive),
            other => match other.strip_prefix("shared:") {
                Some(beta) => {
                    let beta: f64 = beta
                        .parse()
                        .map_err(|_| Error::invalid("law variant", format!("bad shared exponent in {other:?}")))?;
                    LawVariant::shared_exponent(beta)
                }
                None => Err(Error::invalid(
                    "law variant",
                    format!("{other:?}; expected aware, naive or shared:<beta>"),
                )),
            },
        }
    }
}

/// Effective samples one source contributes to a target.
#[inline]
pub(crate) fn contribution(tau: f64, share: f64, budget: f64) -> f64 {
    tau * share * budget
}

/// Objective value with its gradient in `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveValue {
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// A fitted model viewed through one law variant.
///
/// The `*_raw` methods take plain slices and skip validation; they return
/// `+inf` losses when a weighted target receives no effective budget.
#[derive(Debug, Clone, Copy)]
pub struct Surrogate<'m> {
    model: &'m FittedModel,
    variant: LawVariant,
}

impl<'m> Surrogate<'m> {
    pub fn new(model: &'m FittedModel, variant: LawVariant) -> Result<Self> {
        variant.validate()?;
        Ok(Surrogate { model, variant })
    }

    pub fn model(&self) -> &'m FittedModel {
        self.model
    }

    pub fn variant(&self) -> LawVariant {
        self.variant
    }

    pub fn num_domains(&self) -> usize {
        self.model.num_domains()
    }

    fn tau(&self, target: usize, source: usize) -> f64 {
        if self.variant.uses_transfer() {
            self.model.tau().get(target, source)
        } else if target == source {
            1.0
        } else {
            0.0
        }
    }

    fn beta(&self, target: usize) -> f64 {
        match self.variant {
            LawVariant::SharedExponent(beta) => beta,
            _ => self.model.params()[target].beta(),
        }
    }

    pub fn contributions_raw(&self, h: &[f64], budget: f64, target: usize) -> Vec<f64> {
        h.iter()
            .enumerate()
            .map(|(j, &hj)| contribution(self.tau(target, j), hj, budget))
            .collect()
    }

    pub fn effective_budget_raw(&self, h: &[f64], budget: f64, target: usize) -> f64 {
        h.iter()
            .enumerate()
            .map(|(j, &hj)| contribution(self.tau(target, j), hj, budget))
            .sum()
    }

    /// `C * t^-beta`, or `+inf` when `t <= 0`.
    fn power_term(&self, target: usize, t_eff: f64) -> f64 {
        if t_eff > 0.0 {
            self.model.params()[target].c() * (-self.beta(target) * t_eff.ln()).exp()
        } else {
            f64::INFINITY
        }
    }

    pub fn loss_raw(&self, h: &[f64], budget: f64, target: usize) -> f64 {
        let t_eff = self.effective_budget_raw(h, budget, target);
        self.model.params()[target].e() + self.power_term(target, t_eff)
    }

    pub fn gradient_raw(&self, h: &[f64], budget: f64, target: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
        self.accumulate_gradient(h, budget, target, 1.0, out);
    }

    fn accumulate_gradient(&self, h: &[f64], budget: f64, target: usize, weight: f64, out: &mut [f64]) -> f64 {
        let t_eff = self.effective_budget_raw(h, budget, target);
        let power = self.power_term(target, t_eff);
        let slope = weight * self.beta(target) * power / t_eff;
        for (j, g) in out.iter_mut().enumerate() {
            let tau = self.tau(target, j);
            if tau != 0.0 {
                *g -= slope * tau * budget;
            }
        }
        self.model.params()[target].e() + power
    }

    /// Weighted loss summed over targets; `grad` receives its gradient.
    /// Targets with zero weight are skipped entirely.
    pub fn objective_raw(&self, h: &[f64], budget: f64, weights: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut value = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                value += w * self.accumulate_gradient(h, budget, i, w, grad);
            }
        }
        value
    }

    /// Hessian of the weighted objective in `h`, row-major `K x K`.
    pub fn objective_hessian_raw(&self, h: &[f64], budget: f64, weights: &[f64], out: &mut [f64]) {
        let k = h.len();
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let t_eff = self.effective_budget_raw(h, budget, i);
            let beta = self.beta(i);
            let curvature = w * beta * (beta + 1.0) * self.power_term(i, t_eff) / (t_eff * t_eff);
            for a in 0..k {
                let ta = self.tau(i, a) * budget;
                if ta == 0.0 {
                    continue;
                }
                for b in 0..k {
                    out[a * k + b] += curvature * ta * self.tau(i, b) * budget;
                }
            }
        }
    }

    pub fn objective_value_raw(&self, h: &[f64], budget: f64, weights: &[f64]) -> f64 {
        weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(i, &w)| w * self.loss_raw(h, budget, i))
            .sum()
    }

    fn check(&self, h: &MixtureWeights, budget: f64, target: Option<usize>) -> Result<()> {
        let k = self.num_domains();
        if h.len() != k {
            return Err(Error::invalid(
                "mixture weights",
                format!("{} weights for {k} domains", h.len()),
            ));
        }
        if !(budget > 0.0 && budget.is_finite()) {
            return Err(Error::invalid("budget", format!("must be positive and finite, got {budget}")));
        }
        if let Some(t) = target.filter(|&t| t >= k) {
            return Err(Error::invalid("target", format!("index {t} outside {k} domains")));
        }
        Ok(())
    }

    fn checked_effective_budget(&self, h: &[f64], budget: f64, target: usize) -> Result<f64> {
        let t_eff = self.effective_budget_raw(h, budget, target);
        if t_eff > 0.0 {
            Ok(t_eff)
        } else {
            Err(Error::ZeroBudget { target })
        }
    }

    pub fn effective_budget(&self, h: &MixtureWeights, budget: f64, target: usize) -> Result<f64> {
        self.check(h, budget, Some(target))?;
        Ok(self.effective_budget_raw(h.weights(), budget, target))
    }

    pub fn predict_loss(&self, h: &MixtureWeights, budget: f64, target: usize) -> Result<f64> {
        self.check(h, budget, Some(target))?;
        self.checked_effective_budget(h.weights(), budget, target)?;
        Ok(self.loss_raw(h.weights(), budget, target))
    }

    pub fn predict_losses(&self, h: &MixtureWeights, budget: f64) -> Result<Vec<f64>> {
        (0..self.num_domains())
            .map(|i| self.predict_loss(h, budget, i))
            .collect()
    }

    pub fn predict_gradient(&self, h: &MixtureWeights, budget: f64, target: usize) -> Result<Vec<f64>> {
        self.check(h, budget, Some(target))?;
        self.checked_effective_budget(h.weights(), budget, target)?;
        let mut out = vec![0.0; h.len()];
        self.gradient_raw(h.weights(), budget, target, &mut out);
        Ok(out)
    }

    pub fn objective(&self, h: &MixtureWeights, budget: f64, weights: &TargetWeights) -> Result<ObjectiveValue> {
        self.check(h, budget, None)?;
        self.check_weights(weights)?;
        for (i, &w) in weights.as_slice().iter().enumerate() {
            if w != 0.0 {
                self.checked_effective_budget(h.weights(), budget, i)?;
            }
        }
        let mut gradient = vec![0.0; h.len()];
        let value = self.objective_raw(h.weights(), budget, weights.as_slice(), &mut gradient);
        Ok(ObjectiveValue { value, gradient })
    }

    pub(crate) fn check_weights(&self, weights: &TargetWeights) -> Result<()> {
        if weights.len() != self.num_domains() {
            return Err(Error::invalid(
                "target weights",
                format!("{} weights for {} domains", weights.len(), self.num_domains()),
            ));
        }
        Ok(())
    }
}

pub fn effective_budget(model: &FittedModel, h: &MixtureWeights, budget: f64, target: usize) -> Result<f64> {
    Surrogate::new(model, LawVariant::TransferAware)?.effective_budget(h, budget, target)
}

pub fn predict_loss(
    model: &FittedModel,
    h: &MixtureWeights,
    budget: f64,
    target: usize,
    variant: LawVariant,
) -> Result<f64> {
    Surrogate::new(model, variant)?.predict_loss(h, budget, target)
}

/// Gradient of the transfer-aware loss of `target` with respect to `h`.
pub fn predict_gradient(model: &FittedModel, h: &MixtureWeights, budget: f64, target: usize) -> Result<Vec<f64>> {
    Surrogate::new(model, LawVariant::TransferAware)?.predict_gradient(h, budget, target)
}

pub fn objective(
    model: &FittedModel,
    h: &MixtureWeights,
    budget: f64,
    weights: &TargetWeights,
    variant: LawVariant,
) -> Result<ObjectiveValue> {
    Surrogate::new(model, variant)?.objective(h, budget, weights)
}
