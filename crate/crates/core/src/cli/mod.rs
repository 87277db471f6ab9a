//! The `mixlaw` command-line tool.

pub mod io;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    budget_loss_correlation, classify_domains, compare_strategies, decompose, extrapolate, floor_sweep,
    strategy_curves, CurvePoint, DecompositionTable, DomainRoles, ExtrapolationReport, FloorSweep, RatioCorrelation,
    RoleThresholds, Strategy, StrategyComparison,
};
use crate::error::Error;
use crate::fitting::{fit_all, FitConfig};
use crate::model::{CatalogError, DomainCatalog, FittedModel, LossObservation, MixtureViolation, MixtureWeights, TargetWeights};
use crate::optimizer::{optimize_over_budgets, AllocationResult, OptimizerConfig};
use crate::surrogate::{LawVariant, Surrogate};
use crate::synth::{generate_world, sample_observations, NoiseModel, ObservationSet, ParameterRanges, WorldStructure};

use report::{digest, read_report, write_atomic, write_report, Envelope, InputDigest, Provenance};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("{file}:{line}: {reason}")]
    Parse { file: String, line: u64, reason: String },
    #[error("{path}: malformed JSON: {reason}")]
    Json { path: String, reason: String },
    #[error("{path}: {reason}")]
    Report { path: String, reason: String },
    #[error("{0}")]
    Usage(String),
}

impl From<CatalogError> for CliError {
    fn from(e: CatalogError) -> Self {
        CliError::Core(e.into())
    }
}

impl From<MixtureViolation> for CliError {
    fn from(e: MixtureViolation) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Json { .. } => "json",
            CliError::Report { .. } => "report",
            CliError::Usage(_) => "usage",
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        }
    }

    pub(crate) fn json(path: &Path, e: serde_json::Error) -> Self {
        CliError::Json {
            path: path.display().to_string(),
            reason: e.to_string(),
        }
    }

    pub(crate) fn csv(file: &str, e: csv::Error) -> Self {
        CliError::Parse {
            file: file.to_string(),
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        }
    }

    /// Machine-readable form printed on failure.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "error": { "kind": self.kind(), "message": self.to_string() } })
    }
}

#[derive(Debug, Parser)]
#[command(name = "mixlaw", version, about = "Fit transfer-aware scaling laws and optimize data mixtures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit per-domain laws and the transfer matrix from observations.
    Fit(FitArgs),
    /// Optimize the mixture at one or more budgets.
    Optimize(OptimizeArgs),
    /// Predict per-domain losses for a given mixture.
    Predict(PredictArgs),
    /// Break effective budgets into per-source contributions.
    Decompose(DecomposeArgs),
    /// Domain roles, extrapolation check and budget/loss correlation.
    Analyze(AnalyzeArgs),
    /// Reoptimize across a list of floors.
    SweepFloor(SweepFloorArgs),
    /// Score allocation strategies under the fitted law.
    Compare(CompareArgs),
    /// Generate a synthetic world and sample observations from it.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ModelSource {
    /// Model report written by `fit`.
    #[arg(long)]
    #[serde(skip)]
    pub model: Option<PathBuf>,
    /// Domain catalog CSV (`name,volume_count`).
    #[arg(long)]
    #[serde(skip)]
    pub catalog: Option<PathBuf>,
    /// Observations CSV, fitted on the fly when no model is given.
    #[arg(long)]
    #[serde(skip)]
    pub observations: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct OptimizerArgs {
    #[arg(long, default_value_t = 0.05)]
    pub floor: f64,
    #[arg(long, default_value_t = 100)]
    pub restarts: usize,
    #[arg(long, default_value_t = 1000)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Target weights, comma separated; equal weights when omitted.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
}

impl OptimizerArgs {
    fn config(&self) -> OptimizerConfig {
        OptimizerConfig {
            floor: self.floor,
            restarts: self.restarts,
            max_iterations: self.max_iterations,
            rng_seed: self.seed,
            ..OptimizerConfig::default()
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct MixtureSource {
    /// Mixture weights, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub mixture: Option<Vec<f64>>,
    /// Allocation report written by `optimize`; uses its `h_star`.
    #[arg(long, conflicts_with = "mixture")]
    #[serde(skip)]
    pub allocation: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[arg(long)]
    #[serde(skip)]
    pub catalog: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub observations: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub source: ModelSource,
    #[arg(long = "budget", required = true, value_delimiter = ',')]
    pub budgets: Vec<f64>,
    #[arg(long, default_value = "aware")]
    pub variant: LawVariant,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    #[command(flatten)]
    pub source: ModelSource,
    #[command(flatten)]
    pub mixture: MixtureSource,
    #[arg(long = "budget", required = true, value_delimiter = ',')]
    pub budgets: Vec<f64>,
    #[arg(long, default_value = "aware")]
    pub variant: LawVariant,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub source: ModelSource,
    #[command(flatten)]
    pub mixture: MixtureSource,
    #[arg(long = "budget", value_delimiter = ',')]
    pub budgets: Vec<f64>,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub source: ModelSource,
    #[arg(long, default_value_t = 0.15)]
    pub island_max: f64,
    #[arg(long, default_value_t = 0.25)]
    pub hub_min: f64,
    /// Held-out mixture runs (observations CSV, source == target).
    #[arg(long)]
    #[serde(skip)]
    pub held_out: Option<PathBuf>,
    #[command(flatten)]
    pub mixture: MixtureSource,
    /// Budgets the model was fitted on, echoed in the report.
    #[arg(long = "fit-budget", value_delimiter = ',')]
    pub fit_budgets: Vec<f64>,
    /// Held-out runs of a second mixture, for the budget/loss correlation.
    #[arg(long, requires = "held_out")]
    #[serde(skip)]
    pub held_out_b: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub mixture_b: Option<Vec<f64>>,
    #[arg(long, conflicts_with = "mixture_b")]
    #[serde(skip)]
    pub allocation_b: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepFloorArgs {
    #[command(flatten)]
    pub source: ModelSource,
    #[arg(long = "budget", required = true, value_delimiter = ',')]
    pub budgets: Vec<f64>,
    #[arg(long, required = true, value_delimiter = ',')]
    pub floors: Vec<f64>,
    #[arg(long, default_value = "aware")]
    pub variant: LawVariant,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyArg {
    Aware,
    Naive,
    Uniform,
    DataProportional,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Aware => Strategy::TransferAware,
            StrategyArg::Naive => Strategy::TransferNaive,
            StrategyArg::Uniform => Strategy::Uniform,
            StrategyArg::DataProportional => Strategy::DataProportional,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub source: ModelSource,
    #[arg(long = "budget", required = true, value_delimiter = ',')]
    pub budgets: Vec<f64>,
    /// Defaults to every strategy the catalog supports.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub strategies: Vec<StrategyArg>,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureArg {
    Random,
    HubIsland,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseArg {
    Multiplicative,
    Additive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairsArg {
    All,
    SelfOnly,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 6)]
    pub domains: usize,
    #[arg(long, value_enum, default_value_t = StructureArg::HubIsland)]
    pub structure: StructureArg,
    #[arg(long = "budget", value_delimiter = ',', default_values_t = [10_000.0, 50_000.0, 100_000.0, 200_000.0])]
    pub budgets: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    pub seeds_per_budget: usize,
    #[arg(long, value_enum, default_value_t = PairsArg::All)]
    pub pairs: PairsArg,
    #[arg(long, value_enum, default_value_t = NoiseArg::Multiplicative)]
    pub noise: NoiseArg,
    #[arg(long, default_value_t = 0.02)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Observations CSV to write.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    /// Catalog CSV to write alongside the observations.
    #[arg(long)]
    #[serde(skip)]
    pub catalog_out: PathBuf,
    /// Optional report holding the ground-truth world.
    #[arg(long)]
    #[serde(skip)]
    pub world_out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Report bodies
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationReport {
    pub domains: Vec<String>,
    pub weights: Vec<f64>,
    pub config: OptimizerConfig,
    pub allocations: Vec<AllocationResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub budget: f64,
    pub domain: String,
    pub effective_budget: f64,
    pub predicted_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub variant: LawVariant,
    pub mixture: Vec<f64>,
    pub rows: Vec<PredictionRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub tables: Vec<DecompositionTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub roles: DomainRoles,
    pub extrapolation: Option<ExtrapolationReport>,
    pub correlation: Option<RatioCorrelation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub sweeps: Vec<FloorSweep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub comparisons: Vec<StrategyComparison>,
    pub curves: Vec<CurvePoint>,
    pub notes: Vec<String>,
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

/// Input files read during one command, in read order.
#[derive(Default)]
struct Inputs {
    digests: Vec<InputDigest>,
    warnings: Vec<String>,
}

impl Inputs {
    fn read(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.digests.push(digest(path, &bytes));
        Ok(bytes)
    }

    fn catalog(&mut self, path: &Path) -> Result<DomainCatalog, CliError> {
        let bytes = self.read(path)?;
        io::parse_catalog(bytes.as_slice(), &path.display().to_string())
    }

    fn observations(&mut self, path: &Path, catalog: &DomainCatalog) -> Result<Vec<LossObservation>, CliError> {
        let bytes = self.read(path)?;
        let parsed = io::parse_observations(bytes.as_slice(), catalog, &path.display().to_string())?;
        self.warnings.extend(parsed.warnings);
        Ok(parsed.observations)
    }

    fn report<T: serde::de::DeserializeOwned>(&mut self, path: &Path, kind: &str) -> Result<T, CliError> {
        let (envelope, bytes) = read_report::<T>(path, kind)?;
        self.digests.push(digest(path, &bytes));
        Ok(envelope.body)
    }

    fn model(&mut self, source: &ModelSource) -> Result<FittedModel, CliError> {
        match (&source.model, &source.catalog, &source.observations) {
            (Some(path), _, _) => self.report(path, "model"),
            (None, Some(cat), Some(obs)) => {
                let catalog = self.catalog(cat)?;
                let observations = self.observations(obs, &catalog)?;
                Ok(fit_all(&observations, &catalog, &FitConfig::default())?)
            }
            _ => Err(CliError::Usage(
                "provide --model, or --catalog together with --observations".into(),
            )),
        }
    }

    /// Resolves `--mixture` or `--allocation`. For an allocation report the
    /// entry at `budget` is preferred, otherwise the first one, and its
    /// budget is returned alongside.
    fn mixture(
        &mut self,
        inline: &Option<Vec<f64>>,
        allocation: &Option<PathBuf>,
        budget: Option<f64>,
    ) -> Result<Option<(MixtureWeights, Option<f64>)>, CliError> {
        match (inline, allocation) {
            (Some(h), _) => Ok(Some((MixtureWeights::unfloored(h.clone())?, None))),
            (None, Some(path)) => {
                let report: AllocationReport = self.report(path, "allocation")?;
                let chosen = budget
                    .and_then(|b| report.allocations.iter().find(|a| a.budget == b))
                    .or(report.allocations.first())
                    .ok_or_else(|| CliError::Report {
                        path: path.display().to_string(),
                        reason: "allocation report is empty".into(),
                    })?;
                Ok(Some((chosen.h_star.clone(), Some(chosen.budget))))
            }
            (None, None) => Ok(None),
        }
    }

    fn provenance<C: Serialize>(&self, config: &C, seed: Option<u64>) -> Provenance {
        Provenance {
            inputs: self.digests.clone(),
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            seed,
        }
    }
}

fn target_weights(weights: &Option<Vec<f64>>, k: usize) -> Result<TargetWeights, CliError> {
    match weights {
        Some(w) => Ok(TargetWeights::new(w.clone())?),
        None => Ok(TargetWeights::uniform(k)),
    }
}

fn require_mixture(m: Option<(MixtureWeights, Option<f64>)>) -> Result<(MixtureWeights, Option<f64>), CliError> {
    m.ok_or_else(|| CliError::Usage("provide --mixture or --allocation".into()))
}

/// Result of a successful command.
#[derive(Debug)]
pub struct Outcome {
    /// Files written, or the error that stopped the command.
    pub result: Result<Vec<PathBuf>, CliError>,
    /// Input warnings, kept even when the command fails.
    pub warnings: Vec<String>,
}

pub fn run(command: &Command) -> Outcome {
    let mut inputs = Inputs::default();
    let result = execute(command, &mut inputs);
    Outcome {
        result,
        warnings: inputs.warnings,
    }
}

fn execute(command: &Command, inputs: &mut Inputs) -> Result<Vec<PathBuf>, CliError> {
    let written = match command {
        Command::Fit(args) => {
            let catalog = inputs.catalog(&args.catalog)?;
            let observations = inputs.observations(&args.observations, &catalog)?;
            let model = fit_all(&observations, &catalog, &FitConfig::default())?;
            let env = Envelope::new("model", inputs.provenance(args, None), model);
            write_report(&args.out, &env)?;
            vec![args.out.clone()]
        }
        Command::Optimize(args) => {
            let model = inputs.model(&args.source)?;
            let weights = target_weights(&args.optimizer.weights, model.num_domains())?;
            let config = args.optimizer.config();
            let allocations = optimize_over_budgets(&model, &args.budgets, &weights, &config, args.variant)?;
            let body = AllocationReport {
                domains: model.catalog().names().to_vec(),
                weights: weights.as_slice().to_vec(),
                config,
                allocations,
            };
            let env = Envelope::new("allocation", inputs.provenance(args, Some(args.optimizer.seed)), body);
            write_report(&args.out, &env)?;
            vec![args.out.clone()]
        }
        Command::Predict(args) => {
            let model = inputs.model(&args.source)?;
            let (h, _) = require_mixture(inputs.mixture(
                &args.mixture.mixture,
                &args.mixture.allocation,
                args.budgets.first().copied(),
            )?)?;
            let surrogate = Surrogate::new(&model, args.variant)?;
            let mut rows = Vec::new();
            for &budget in &args.budgets {
                for (i, name) in model.catalog().names().iter().enumerate() {
                    rows.push(PredictionRow {
                        budget,
                        domain: name.clone(),
                        effective_budget: surrogate.effective_budget(&h, budget, i)?,
                        predicted_loss: surrogate.predict_loss(&h, budget, i)?,
                    });
                }
            }
            let body = PredictionReport {
                variant: args.variant,
                mixture: h.weights().to_vec(),
                rows,
            };
            let env = Envelope::new("prediction", inputs.provenance(args, None), body);
            write_report(&args.out, &env)?;
            vec![args.out.clone()]
        }
        Command::Decompose(args) => {
            let model = inputs.model(&args.source)?;
            let (h, allocation_budget) = require_mixture(inputs.mixture(
                &args.mixture.mixture,
                &args.mixture.allocation,
                args.budgets.first().copied(),
            )?)?;
            let budgets = match (args.budgets.is_empty(), allocation_budget) {
                (false, _) => args.budgets.clone(),
                (true, Some(b)) => vec![b],
                (true, None) => return Err(CliError::Usage("provide --budget".into())),
            };
            let tables = budgets
                .iter()
                .map(|&b| decompose(&model, &h, b))
                .collect::<Result<Vec<_>, _>>()?;
            let env = Envelope::new("decomposition", inputs.provenance(args, None), DecompositionReport { tables });
            write_report(&args.out, &env)?;
            vec![args.out.clone()]
        }
        Command::Analyze(args) => {
            let model = inputs.model(&args.source)?;
            let thresholds = RoleThresholds {
                island_max: args.island_max,
                hub_min: args.hub_min,
            };
            let roles = classify_domains(&model, thresholds)?;
            let catalog = model.catalog().clone();
            let held_out_a = match &args.held_out {
                Some(path) => Some(inputs.observations(path, &catalog)?),
                None => None,
            };
            let h_a = inputs
                .mixture(&args.mixture.mixture, &args.mixture.allocation, None)?
                .map(|(h, _)| h);
            let extrapolation = match (&held_out_a, &h_a) {
                (Some(obs), Some(h)) => Some(extrapolate(&model, obs, h, &args.fit_budgets)?),
                (Some(_), None) => return Err(CliError::Usage("--held-out needs --mixture or --allocation".into())),
                _ => None,
            };
            let correlation = match (&args.held_out_b, &extrapolation) {
                (Some(path), Some(report_a)) => {
                    let obs_b = inputs.observations(path, &catalog)?;
                    let (h_b, _) = require_mixture(inputs.mixture(&args.mixture_b, &args.allocation_b, None)?)?;
                    let report_b = extrapolate(&model, &obs_b, &h_b, &args.fit_budgets)?;
                    let budget = *report_a.held_out_budgets.last().expect("non-empty report");
                    let losses = |r: &ExtrapolationReport| -> Result<Vec<f64>, CliError> {
                        catalog
                            .names()
                            .iter()
                            .map(|n| {
                                r.rows
                                    .iter()
                                    .find(|row| &row.domain == n && row.budget == budget)
                                    .map(|row| row.observed)
                                    .ok_or_else(|| {
                                        CliError::Usage(format!("held-out runs lack domain {n} at budget {budget}"))
                                    })
                            })
                            .collect()
                    };
                    let h_a = h_a.as_ref().expect("checked above");
                    Some(budget_loss_correlation(
                        &decompose(&model, h_a, budget)?,
                        &decompose(&model, &h_b, budget)?,
                        &losses(report_a)?,
                        &losses(&report_b)?,
                    )?)
                }
                _ => None,
            };
            let body = AnalysisReport {
                roles,
                extrapolation,
                correlation,
            };
            let env = Envelope::new("analysis", inputs.provenance(args, None), body);
            write_report(&args.out, &env)?;
            vec![args.out.clone()]
        }
        Command::SweepFloor(args) => {
            let model = inputs.model(&args.source)?;
            let weights = target_weights(&args.optimizer.weights, model.num_domains())?;
            let config = args.optimizer.config();
            let sweeps = args
                .budgets
                .iter()
                .map(|&b| floor_sweep(&model, b, &weights, &args.floors, &config, args.variant))
                .collect::<Result<Vec<_>, _>>()?;
            let env = Envelope::new(
                "floor_sweep",
                inputs.provenance(args, Some(args.optimizer.seed)),
                SweepReport { sweeps },
            );
            write_report(&args.out, &env)?;
            vec![args.out.clone()]
        }
        Command::Compare(args) => {
            let model = inputs.model(&args.source)?;
            let weights = target_weights(&args.optimizer.weights, model.num_domains())?;
            let config = args.optimizer.config();
            let mut notes = Vec::new();
            let strategies: Vec<Strategy> = if args.strategies.is_empty() {
                Strategy::ALL
                    .into_iter()
                    .filter(|s| {
                        let keep = *s != Strategy::DataProportional || model.catalog().volume_counts().is_some();
                        if !keep {
                            notes.push("data_proportional skipped: catalog has no volume counts".to_string());
                        }
                        keep
                    })
                    .collect()
            } else {
                args.strategies.iter().map(|&s| s.into()).collect()
            };
            let comparisons = args
                .budgets
                .iter()
                .map(|&b| compare_strategies(&model, b, &strategies, &weights, &config))
                .collect::<Result<Vec<_>, _>>()?;
            let curves = strategy_curves(&comparisons);
            let body = ComparisonReport {
                comparisons,
                curves,
                notes,
            };
            let env = Envelope::new("comparison", inputs.provenance(args, Some(args.optimizer.seed)), body);
            write_report(&args.out, &env)?;
            vec![args.out.clone()]
        }
        Command::Simulate(args) => {
            let structure = match args.structure {
                StructureArg::Random => WorldStructure::Random,
                StructureArg::HubIsland => WorldStructure::HubIsland,
            };
            let noise = match args.noise {
                NoiseArg::Multiplicative => NoiseModel::Multiplicative { sigma: args.sigma },
                NoiseArg::Additive => NoiseModel::Additive { sigma: args.sigma },
            };
            let world = generate_world(args.domains, &ParameterRanges::default(), structure, args.seed)?
                .with_noise(noise)?;
            let set = match args.pairs {
                PairsArg::All => ObservationSet::AllPairs,
                PairsArg::SelfOnly => ObservationSet::SelfOnly,
            };
            let observations = sample_observations(&world, &args.budgets, args.seeds_per_budget, set)?;
            let obs_bytes = io::write_observations(&observations, &world.catalog)?;
            let cat_bytes = io::write_catalog(&world.catalog)?;
            let mut written = Vec::new();
            if let Some(path) = &args.world_out {
                let env = Envelope::new("world", inputs.provenance(args, Some(args.seed)), world.clone());
                write_report(path, &env)?;
                written.push(path.clone());
            }
            write_atomic(&args.catalog_out, &cat_bytes)?;
            write_atomic(&args.out, &obs_bytes)?;
            written.push(args.catalog_out.clone());
            written.push(args.out.clone());
            written
        }
    };
    Ok(written)
}

/// Process entry point: runs the parsed command and reports failures as a
/// JSON object on stderr.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    let outcome = run(&cli.command);
    for w in &outcome.warnings {
        eprintln!("{}", serde_json::json!({ "warning": w }));
    }
    match outcome.result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
