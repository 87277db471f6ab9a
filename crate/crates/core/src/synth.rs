//! Synthetic ground-truth worlds and noisy loss sampling.
//!
//! Every random draw comes from a ChaCha stream derived from the world seed
//! and the identity of what is being drawn, so output does not depend on the
//! order in which configurations are generated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    DomainCatalog, FitDiagnostics, FittedModel, LossObservation, MixtureWeights, ScalingParams, TransferMatrix,
    BETA_MAX, BETA_MIN,
};
use crate::surrogate::{LawVariant, Surrogate};

/// Smallest loss a noisy sample may take.
pub const LOSS_FLOOR: f64 = 1e-9;

const HUB_OUT_BAND: (f64, f64) = (0.4, 0.7);
const ISLAND_BAND: (f64, f64) = (0.005, 0.06);
const BACKGROUND_BAND: (f64, f64) = (0.15, 0.3);
const VOLUME_BAND: (u64, u64) = (50, 500);

const STREAM_WORLD: u64 = 0;
const STREAM_MIXTURE: u64 = 1;
const STREAM_PAIRS: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterRanges {
    pub e: (f64, f64),
    pub c: (f64, f64),
    pub beta: (f64, f64),
    /// Off-diagonal transfer range for random worlds.
    pub tau: (f64, f64),
}

impl Default for ParameterRanges {
    fn default() -> Self {
        ParameterRanges {
            e: (0.001, 0.004),
            c: (2.0, 10.0),
            beta: (0.3, 0.55),
            tau: (0.05, 0.6),
        }
    }
}

impl ParameterRanges {
    pub fn validate(&self) -> Result<()> {
        let ordered = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        let bad = |reason: String| Err(Error::invalid("parameter ranges", reason));
        if !(ordered(self.e) && self.e.0 >= 0.0) {
            return bad(format!("E range {:?} must be ordered and non-negative", self.e));
        }
        if !(ordered(self.c) && self.c.0 > 0.0) {
            return bad(format!("C range {:?} must be ordered and positive", self.c));
        }
        if !(ordered(self.beta) && self.beta.0 >= BETA_MIN && self.beta.1 <= BETA_MAX) {
            return bad(format!("beta range {:?} must lie in [{BETA_MIN}, {BETA_MAX}]", self.beta));
        }
        if !(ordered(self.tau) && self.tau.0 > 0.0 && self.tau.1 <= 1.0) {
            return bad(format!("tau range {:?} must lie in (0, 1]", self.tau));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldStructure {
    /// Every parameter and transfer entry drawn uniformly from its range.
    Random,
    /// Domain 0 is a hub sending 0.4-0.7 to every non-island target; the last
    /// domain is an island whose incident entries are at most 0.06; all other
    /// transfer lies in 0.15-0.3. Requires at least four domains.
    HubIsland,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// `loss * (1 + sigma * z)`
    Multiplicative { sigma: f64 },
    /// `loss + sigma * z`
    Additive { sigma: f64 },
}

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel::Multiplicative { sigma: 0.0 }
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            NoiseModel::Multiplicative { sigma } | NoiseModel::Additive { sigma } => sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sigma = self.sigma();
        if sigma.is_finite() && sigma >= 0.0 {
            Ok(())
        } else {
            Err(Error::invalid("noise model", format!("sigma must be >= 0, got {sigma}")))
        }
    }

    fn perturb<R: Rng + ?Sized>(&self, rng: &mut R, loss: f64) -> f64 {
        let sigma = self.sigma();
        let noisy = if sigma == 0.0 {
            loss
        } else {
            let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
            match self {
                NoiseModel::Multiplicative { .. } => loss * (1.0 + sigma * z),
                NoiseModel::Additive { .. } => loss + sigma * z,
            }
        };
        noisy.max(LOSS_FLOOR)
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::Multiplicative { sigma: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthWorld {
    pub catalog: DomainCatalog,
    pub params: Vec<ScalingParams>,
    pub tau: TransferMatrix,
    pub noise_model: NoiseModel,
    pub rng_seed: u64,
}

impl GroundTruthWorld {
    pub fn new(
        catalog: DomainCatalog,
        params: Vec<ScalingParams>,
        tau: TransferMatrix,
        noise_model: NoiseModel,
        rng_seed: u64,
    ) -> Result<Self> {
        noise_model.validate()?;
        FittedModel::new(catalog.clone(), params.clone(), tau.clone(), FitDiagnostics::default())?;
        Ok(GroundTruthWorld {
            catalog,
            params,
            tau,
            noise_model,
            rng_seed,
        })
    }

    pub fn num_domains(&self) -> usize {
        self.catalog.len()
    }

    pub fn with_noise(mut self, noise_model: NoiseModel) -> Result<Self> {
        noise_model.validate()?;
        self.noise_model = noise_model;
        Ok(self)
    }

    /// The true law packaged as a model, for evaluating oracles.
    pub fn as_model(&self) -> FittedModel {
        FittedModel::new(
            self.catalog.clone(),
            self.params.clone(),
            self.tau.clone(),
            FitDiagnostics::default(),
        )
        .expect("world invariants match model invariants")
    }

    /// Noise-free loss of `target` after training on `budget` samples of `source`.
    pub fn true_loss(&self, target: usize, source: usize, budget: f64) -> f64 {
        self.params[target].loss_at(self.tau.get(target, source) * budget)
    }
}

fn derived_rng(seed: u64, stream: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(stream);
    rng
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

pub fn generate_world(
    k: usize,
    ranges: &ParameterRanges,
    structure: WorldStructure,
    rng_seed: u64,
) -> Result<GroundTruthWorld> {
    ranges.validate()?;
    if k < 2 {
        return Err(Error::invalid("world size", format!("need at least 2 domains, got {k}")));
    }
    if structure == WorldStructure::HubIsland && k < 4 {
        return Err(Error::invalid(
            "world size",
            format!("hub-island structure needs at least 4 domains, got {k}"),
        ));
    }
    let mut rng = derived_rng(rng_seed, STREAM_WORLD, 0);

    let names: Vec<String> = (0..k).map(|i| format!("domain_{i}")).collect();
    let counts: Vec<i64> = (0..k)
        .map(|_| rng.random_range(VOLUME_BAND.0..=VOLUME_BAND.1) as i64)
        .collect();
    let catalog = DomainCatalog::new(names, Some(counts))?;

    let mut params = Vec::with_capacity(k);
    for _ in 0..k {
        let e = uniform(&mut rng, ranges.e);
        let c = uniform(&mut rng, ranges.c);
        let beta = uniform(&mut rng, ranges.beta);
        params.push(ScalingParams::new(e, c, beta)?);
    }

    let (hub, island) = (0, k - 1);
    let mut rows = vec![vec![0.0; k]; k];
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = if i == j {
                1.0
            } else {
                match structure {
                    WorldStructure::Random => uniform(&mut rng, ranges.tau),
                    WorldStructure::HubIsland if i == island || j == island => uniform(&mut rng, ISLAND_BAND),
                    WorldStructure::HubIsland if j == hub => uniform(&mut rng, HUB_OUT_BAND),
                    WorldStructure::HubIsland => uniform(&mut rng, BACKGROUND_BAND),
                }
            };
        }
    }

    GroundTruthWorld::new(
        catalog,
        params,
        TransferMatrix::new(rows)?,
        NoiseModel::default(),
        rng_seed,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationSet {
    /// Pure runs scored on their own domain.
    SelfOnly,
    /// Every directed (target, source) pair including the diagonal.
    AllPairs,
}

/// Pure-source proxy runs, ordered by target, source, budget, seed.
pub fn sample_observations(
    world: &GroundTruthWorld,
    budgets: &[f64],
    seeds_per_budget: usize,
    configurations: ObservationSet,
) -> Result<Vec<LossObservation>> {
    if let Some(b) = budgets.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
        return Err(Error::invalid("budgets", format!("must be positive, got {b}")));
    }
    if seeds_per_budget == 0 {
        return Err(Error::invalid("seeds per budget", "must be at least 1"));
    }
    let k = world.num_domains();
    let pairs: Vec<(usize, usize)> = match configurations {
        ObservationSet::SelfOnly => (0..k).map(|i| (i, i)).collect(),
        ObservationSet::AllPairs => (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).collect(),
    };

    let mut out = Vec::with_capacity(pairs.len() * budgets.len() * seeds_per_budget);
    for (i, j) in pairs {
        for &budget in budgets {
            let mut rng = derived_rng(world.rng_seed, STREAM_PAIRS + (i * k + j) as u64, budget.to_bits());
            let clean = world.true_loss(i, j, budget);
            if !clean.is_finite() {
                return Err(Error::ZeroBudget { target: i });
            }
            for seed in 0..seeds_per_budget {
                let loss = world.noise_model.perturb(&mut rng, clean);
                out.push(LossObservation::new(i, j, budget, seed as i64, loss)?);
            }
        }
    }
    Ok(out)
}

/// Runs trained on mixture `h`, one observation per target and seed. Each
/// observation is recorded with `source == target`.
pub fn sample_mixture_observations(
    world: &GroundTruthWorld,
    h: &MixtureWeights,
    budget: f64,
    seeds: usize,
) -> Result<Vec<LossObservation>> {
    let model = world.as_model();
    let surrogate = Surrogate::new(&model, LawVariant::TransferAware)?;
    let clean = surrogate.predict_losses(h, budget)?;
    let mut rng = derived_rng(world.rng_seed, STREAM_MIXTURE, budget.to_bits());
    let mut out = Vec::with_capacity(clean.len() * seeds);
    for (i, &loss) in clean.iter().enumerate() {
        for seed in 0..seeds {
            let noisy = world.noise_model.perturb(&mut rng, loss);
            out.push(LossObservation::new(i, i, budget, seed as i64, noisy)?);
        }
    }
    Ok(out)
}
