//! Domain types shared by every other module.
//!
//! Domain order is fixed by the [`DomainCatalog`] and is the only index
//! semantics used anywhere: vectors and matrices are indexed by catalog
//! position, and names are resolved to indices at ingestion.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};

/// Absolute tolerance for simplex membership checks.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Lower bound on fitted scaling exponents.
pub const BETA_MIN: f64 = 0.01;
/// Upper bound on fitted scaling exponents.
pub const BETA_MAX: f64 = 2.0;

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CatalogViolation {
    Empty,
    EmptyName { index: usize },
    DuplicateName { index: usize, name: String },
    NegativeCount { index: usize, count: i64 },
    CountLengthMismatch { expected: usize, found: usize },
    NoPositiveCount,
}

impl fmt::Display for CatalogViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CatalogViolation::Empty => write!(f, "catalog has no domains"),
            CatalogViolation::EmptyName { index } => write!(f, "domain {index} has an empty name"),
            CatalogViolation::DuplicateName { index, name } => {
                write!(f, "domain {index} duplicates name {name:?}")
            }
            CatalogViolation::NegativeCount { index, count } => {
                write!(f, "domain {index} has negative volume count {count}")
            }
            CatalogViolation::CountLengthMismatch { expected, found } => {
                write!(f, "expected {expected} volume counts, found {found}")
            }
            CatalogViolation::NoPositiveCount => write!(f, "all volume counts are zero"),
        }
    }
}

/// Every invariant violation found in a candidate catalog.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid catalog: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct CatalogError {
    pub violations: Vec<CatalogViolation>,
}

/// Checks catalog invariants and reports every violation, not just the first.
pub fn validate_catalog(
    names: &[String],
    volume_counts: Option<&[i64]>,
) -> std::result::Result<(), CatalogError> {
    let mut violations = Vec::new();
    if names.is_empty() {
        violations.push(CatalogViolation::Empty);
    }
    let mut seen = HashSet::new();
    for (index, name) in names.iter().enumerate() {
        if name.trim().is_empty() {
            violations.push(CatalogViolation::EmptyName { index });
        } else if !seen.insert(name.as_str()) {
            violations.push(CatalogViolation::DuplicateName {
                index,
                name: name.clone(),
            });
        }
    }
    if let Some(counts) = volume_counts {
        if counts.len() != names.len() {
            violations.push(CatalogViolation::CountLengthMismatch {
                expected: names.len(),
                found: counts.len(),
            });
        }
        for (index, &count) in counts.iter().enumerate() {
            if count < 0 {
                violations.push(CatalogViolation::NegativeCount { index, count });
            }
        }
        if !counts.is_empty() && counts.iter().all(|&c| c <= 0) {
            violations.push(CatalogViolation::NoPositiveCount);
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CatalogError { violations })
    }
}

/// Ordered registry of domains with optional per-domain volume counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCatalog", into = "RawCatalog")]
pub struct DomainCatalog {
    names: Vec<String>,
    volume_counts: Option<Vec<u64>>,
}

#[derive(Serialize, Deserialize)]
struct RawCatalog {
    names: Vec<String>,
    volume_counts: Option<Vec<i64>>,
}

impl TryFrom<RawCatalog> for DomainCatalog {
    type Error = CatalogError;

    fn try_from(raw: RawCatalog) -> std::result::Result<Self, CatalogError> {
        DomainCatalog::new(raw.names, raw.volume_counts)
    }
}

impl From<DomainCatalog> for RawCatalog {
    fn from(c: DomainCatalog) -> Self {
        RawCatalog {
            names: c.names,
            volume_counts: c
                .volume_counts
                .map(|v| v.into_iter().map(|x| x as i64).collect()),
        }
    }
}

impl DomainCatalog {
    pub fn new(
        names: Vec<String>,
        volume_counts: Option<Vec<i64>>,
    ) -> std::result::Result<Self, CatalogError> {
        validate_catalog(&names, volume_counts.as_deref())?;
        Ok(DomainCatalog {
            names,
            volume_counts: volume_counts.map(|v| v.into_iter().map(|x| x as u64).collect()),
        })
    }

    /// Catalog without volume counts.
    pub fn from_names<S: Into<String>>(
        names: impl IntoIterator<Item = S>,
    ) -> std::result::Result<Self, CatalogError> {
        Self::new(names.into_iter().map(Into::into).collect(), None)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn volume_counts(&self) -> Option<&[u64]> {
        self.volume_counts.as_deref()
    }
}

// ---------------------------------------------------------------------------
// Observations and parameters
// ---------------------------------------------------------------------------

/// One proxy-run measurement: train on `source`, evaluate on `target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossObservation {
    target: usize,
    source: usize,
    budget: f64,
    seed: i64,
    loss: f64,
}

impl LossObservation {
    pub fn new(target: usize, source: usize, budget: f64, seed: i64, loss: f64) -> Result<Self> {
        if !(budget.is_finite() && budget > 0.0) {
            return Err(Error::invalid("observation", format!("budget must be positive, got {budget}")));
        }
        if !(loss.is_finite() && loss > 0.0) {
            return Err(Error::invalid("observation", format!("loss must be positive, got {loss}")));
        }
        Ok(LossObservation {
            target,
            source,
            budget,
            seed,
            loss,
        })
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn seed(&self) -> i64 {
        self.seed
    }

    pub fn loss(&self) -> f64 {
        self.loss
    }

    pub fn is_self_run(&self) -> bool {
        self.target == self.source
    }
}

/// Per-target power law `L(T) = E + C / T^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ScalingParams {
    e: f64,
    c: f64,
    beta: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    #[serde(rename = "E")]
    e: f64,
    #[serde(rename = "C")]
    c: f64,
    beta: f64,
}

impl TryFrom<RawParams> for ScalingParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ScalingParams::new(raw.e, raw.c, raw.beta)
    }
}

impl From<ScalingParams> for RawParams {
    fn from(p: ScalingParams) -> Self {
        RawParams {
            e: p.e,
            c: p.c,
            beta: p.beta,
        }
    }
}

impl ScalingParams {
    pub fn new(e: f64, c: f64, beta: f64) -> Result<Self> {
        if !(e.is_finite() && e >= 0.0) {
            return Err(Error::invalid("scaling params", format!("E must be >= 0, got {e}")));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::invalid("scaling params", format!("C must be > 0, got {c}")));
        }
        if !(BETA_MIN..=BETA_MAX).contains(&beta) {
            return Err(Error::invalid(
                "scaling params",
                format!("beta must lie in [{BETA_MIN}, {BETA_MAX}], got {beta}"),
            ));
        }
        Ok(ScalingParams { e, c, beta })
    }

    /// Asymptotic loss floor.
    pub fn e(&self) -> f64 {
        self.e
    }

    /// Reducible-loss coefficient.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// Scaling exponent.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Self-domain loss at budget `t`.
    pub fn loss_at(&self, t: f64) -> f64 {
        self.e + self.c * (-self.beta * t.ln()).exp()
    }
}

/// Directed transfer coefficients; `get(i, j)` is the effectiveness of
/// source `j` for target `i`. The diagonal is exactly one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct TransferMatrix {
    k: usize,
    entries: Vec<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for TransferMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        TransferMatrix::new(rows)
    }
}

impl From<TransferMatrix> for Vec<Vec<f64>> {
    fn from(t: TransferMatrix) -> Self {
        t.rows().map(<[f64]>::to_vec).collect()
    }
}

impl TransferMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::invalid("transfer matrix", "matrix is empty"));
        }
        let mut entries = Vec::with_capacity(k * k);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != k {
                return Err(Error::invalid(
                    "transfer matrix",
                    format!("row {i} has {} entries, expected {k}", row.len()),
                ));
            }
            for (j, &v) in row.iter().enumerate() {
                if i == j && v != 1.0 {
                    return Err(Error::invalid(
                        "transfer matrix",
                        format!("diagonal entry ({i},{i}) is {v}, must be exactly 1"),
                    ));
                }
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::invalid(
                        "transfer matrix",
                        format!("entry ({i},{j}) = {v} outside [0, 1]"),
                    ));
                }
            }
            entries.extend(row);
        }
        Ok(TransferMatrix { k, entries })
    }

    pub fn identity(k: usize) -> Self {
        let mut entries = vec![0.0; k * k];
        for i in 0..k {
            entries[i * k + i] = 1.0;
        }
        TransferMatrix { k, entries }
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn get(&self, target: usize, source: usize) -> f64 {
        self.entries[target * self.k + source]
    }

    pub fn row(&self, target: usize) -> &[f64] {
        &self.entries[target * self.k..(target + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks(self.k)
    }
}

// ---------------------------------------------------------------------------
// Mixture and target weights
// ---------------------------------------------------------------------------

/// The simplex-with-floor constraint a candidate mixture violated.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MixtureViolation {
    #[error("mixture is empty")]
    Empty,
    #[error("weight {index} is not finite")]
    NonFinite { index: usize },
    #[error("floor {floor} is infeasible for {domains} domains")]
    FloorInfeasible { floor: f64, domains: usize },
    #[error("weight {index} = {value} is below the floor {floor}")]
    BelowFloor { index: usize, value: f64, floor: f64 },
    #[error("weights sum to {sum}, expected 1")]
    SumNotOne { sum: f64 },
}

/// A point on the floored simplex `{h : h_j >= floor, sum h = 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixture", into = "RawMixture")]
pub struct MixtureWeights {
    h: Vec<f64>,
    floor: f64,
}

#[derive(Serialize, Deserialize)]
struct RawMixture {
    h: Vec<f64>,
    floor: f64,
}

impl TryFrom<RawMixture> for MixtureWeights {
    type Error = MixtureViolation;

    fn try_from(raw: RawMixture) -> std::result::Result<Self, MixtureViolation> {
        MixtureWeights::new(raw.h, raw.floor)
    }
}

impl From<MixtureWeights> for RawMixture {
    fn from(m: MixtureWeights) -> Self {
        RawMixture {
            h: m.h,
            floor: m.floor,
        }
    }
}

impl MixtureWeights {
    pub fn new(h: Vec<f64>, floor: f64) -> std::result::Result<Self, MixtureViolation> {
        let k = h.len();
        if k == 0 {
            return Err(MixtureViolation::Empty);
        }
        if !(floor.is_finite() && floor >= 0.0 && floor * (k as f64) < 1.0) {
            return Err(MixtureViolation::FloorInfeasible { floor, domains: k });
        }
        for (index, &value) in h.iter().enumerate() {
            if !value.is_finite() {
                return Err(MixtureViolation::NonFinite { index });
            }
            if value < floor - SIMPLEX_TOLERANCE {
                return Err(MixtureViolation::BelowFloor { index, value, floor });
            }
        }
        let sum: f64 = h.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(MixtureViolation::SumNotOne { sum });
        }
        Ok(MixtureWeights { h, floor })
    }

    /// Mixture with no floor constraint.
    pub fn unfloored(h: Vec<f64>) -> std::result::Result<Self, MixtureViolation> {
        Self::new(h, 0.0)
    }

    pub fn uniform(k: usize) -> Self {
        MixtureWeights {
            h: vec![1.0 / k as f64; k],
            floor: 0.0,
        }
    }

    /// All mass on one domain.
    pub fn pure(k: usize, domain: usize) -> Self {
        let mut h = vec![0.0; k];
        h[domain] = 1.0;
        MixtureWeights { h, floor: 0.0 }
    }

    pub fn weights(&self) -> &[f64] {
        &self.h
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

/// Relative importance of each target in the allocation objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TargetWeights(Vec<f64>);

impl TryFrom<Vec<f64>> for TargetWeights {
    type Error = Error;

    fn try_from(w: Vec<f64>) -> Result<Self> {
        TargetWeights::new(w)
    }
}

impl From<TargetWeights> for Vec<f64> {
    fn from(w: TargetWeights) -> Self {
        w.0
    }
}

impl TargetWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = w.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid("target weights", format!("weight {i} = {v} must be >= 0")));
        }
        if w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::invalid("target weights", "weights must not all be zero"));
        }
        Ok(TargetWeights(w))
    }

    /// `w_i = 1/K`, the equal-weight objective.
    pub fn uniform(k: usize) -> Self {
        TargetWeights(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|w| w * factor).collect())
    }
}

// ---------------------------------------------------------------------------
// Fitted model
// ---------------------------------------------------------------------------

/// Outcome class of one directed transfer fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferFitStatus {
    Fitted,
    /// The unconstrained optimum lies above 1; tau was clipped.
    ClippedAtUpper,
    /// The optimum sits on the lower tau bound.
    AtLowerBound,
    /// Every observed loss is at or below the target floor E.
    Saturated,
    /// No observations for this pair; tau set to the lower bound.
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfFitDiagnostics {
    pub domain: usize,
    /// Sum of squared residuals over budget-level means.
    pub rss: f64,
    pub converged: bool,
    pub iterations: usize,
    pub budget_levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFitDiagnostics {
    pub target: usize,
    pub source: usize,
    pub rss: f64,
    pub status: TransferFitStatus,
    pub budget_levels: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub self_fits: Vec<SelfFitDiagnostics>,
    pub transfer_fits: Vec<TransferFitDiagnostics>,
}

/// Everything the surrogate needs: per-domain self laws plus the transfer matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct FittedModel {
    catalog: DomainCatalog,
    params: Vec<ScalingParams>,
    tau: TransferMatrix,
    fit_diagnostics: FitDiagnostics,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    catalog: DomainCatalog,
    params: Vec<ScalingParams>,
    tau: TransferMatrix,
    #[serde(default)]
    fit_diagnostics: FitDiagnostics,
}

impl TryFrom<RawModel> for FittedModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        FittedModel::new(raw.catalog, raw.params, raw.tau, raw.fit_diagnostics)
    }
}

impl From<FittedModel> for RawModel {
    fn from(m: FittedModel) -> Self {
        RawModel {
            catalog: m.catalog,
            params: m.params,
            tau: m.tau,
            fit_diagnostics: m.fit_diagnostics,
        }
    }
}

impl FittedModel {
    pub fn new(
        catalog: DomainCatalog,
        params: Vec<ScalingParams>,
        tau: TransferMatrix,
        fit_diagnostics: FitDiagnostics,
    ) -> Result<Self> {
        let k = catalog.len();
        if params.len() != k {
            return Err(Error::invalid(
                "fitted model",
                format!("{} parameter triples for {k} domains", params.len()),
            ));
        }
        if tau.dim() != k {
            return Err(Error::invalid(
                "fitted model",
                format!("transfer matrix is {0}x{0} for {k} domains", tau.dim()),
            ));
        }
        Ok(FittedModel {
            catalog,
            params,
            tau,
            fit_diagnostics,
        })
    }

    pub fn catalog(&self) -> &DomainCatalog {
        &self.catalog
    }

    pub fn params(&self) -> &[ScalingParams] {
        &self.params
    }

    pub fn tau(&self) -> &TransferMatrix {
        &self.tau
    }

    pub fn fit_diagnostics(&self) -> &FitDiagnostics {
        &self.fit_diagnostics
    }

    pub fn num_domains(&self) -> usize {
        self.catalog.len()
    }

    /// Same self laws with transfer disabled.
    pub fn without_transfer(&self) -> Self {
        FittedModel {
            tau: TransferMatrix::identity(self.num_domains()),
            ..self.clone()
        }
    }
}
