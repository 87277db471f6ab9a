//! Runs every acceptance criterion, printing one pass/fail line each, and
//! exits non-zero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::Parser;
use common::*;
use mixlaw::analysis::{compare_strategies, correlate_ratios, decompose, extrapolate, Strategy};
use mixlaw::cli::{run, Cli};
use mixlaw::fitting::{fit_all, FitConfig};
use mixlaw::model::{DomainCatalog, FittedModel, MixtureWeights, TargetWeights};
use mixlaw::optimizer::{heuristic_mixture, optimize_mixture, HeuristicStrategy, OptimizerConfig};
use mixlaw::surrogate::{predict_gradient, LawVariant};
use mixlaw::synth::{
    generate_world, sample_mixture_observations, sample_observations, GroundTruthWorld, NoiseModel, ObservationSet,
    ParameterRanges, WorldStructure,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIT_BUDGETS: [f64; 4] = [1e4, 5e4, 1e5, 2e5];

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

struct Criterion {
    id: u8,
    name: &'static str,
    limit: Duration,
    check: fn() -> Verdict,
}

fn world(k: usize, structure: WorldStructure, seed: u64, noise: NoiseModel) -> GroundTruthWorld {
    generate_world(k, &ParameterRanges::default(), structure, seed)
        .unwrap()
        .with_noise(noise)
        .unwrap()
}

fn fitted(world: &GroundTruthWorld, budgets: &[f64], seeds: usize) -> FittedModel {
    let obs = sample_observations(world, budgets, seeds, ObservationSet::AllPairs).unwrap();
    fit_all(&obs, &world.catalog, &FitConfig::default()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn reference_decomposition() -> Verdict {
    let h = MixtureWeights::new(REFERENCE_MIXTURE.to_vec(), 0.05).unwrap();
    let table = decompose(&reference_model(), &h, REFERENCE_BUDGET).unwrap();
    let mut mismatches = Vec::new();
    for (i, row) in table.rows.iter().enumerate() {
        for (j, &c) in row.contributions.iter().enumerate() {
            if c.round() != REFERENCE_CONTRIBUTIONS[i][j] {
                mismatches.push(format!("({i},{j})={c}"));
            }
        }
        if row.effective_budget.round() != REFERENCE_TOTALS[i] {
            mismatches.push(format!("total {i}={}", row.effective_budget));
        }
    }
    verdict(
        mismatches.is_empty(),
        format!("36 cells and 6 totals checked, {} mismatches {:?}", mismatches.len(), mismatches),
    )
}

fn data_proportional() -> Verdict {
    let catalog = DomainCatalog::new(names(), Some(VOLUME_COUNTS.to_vec())).unwrap();
    let h = heuristic_mixture(&catalog, HeuristicStrategy::DataProportional, 0.05).unwrap();
    let worst = h
        .weights()
        .iter()
        .zip(&DATA_PROPORTIONAL)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    verdict(worst <= 5e-4, format!("max deviation {worst:.2e} (limit 5e-4)"))
}

fn ratio_correlation() -> Verdict {
    let c = correlate_ratios(&names(), &BUDGET_RATIOS, &LOSS_RATIOS).unwrap();
    match c.pearson_r {
        Some(r) => verdict(
            (r - RATIO_CORRELATION).abs() <= 5e-3,
            format!("r = {r:.5} (target {RATIO_CORRELATION} +/- 5e-3)"),
        ),
        None => verdict(false, "correlation undefined".into()),
    }
}

fn noiseless_recovery() -> Verdict {
    let (mut e, mut c, mut b, mut t) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let worlds = 50;
    for seed in 0..worlds {
        let w = world(6, WorldStructure::Random, 1_000 + seed, NoiseModel::none());
        let model = fitted(&w, &FIT_BUDGETS, 1);
        for (fit, truth) in model.params().iter().zip(&w.params) {
            e = e.max(rel(fit.e(), truth.e()));
            c = c.max(rel(fit.c(), truth.c()));
            b = b.max(rel(fit.beta(), truth.beta()));
        }
        for i in 0..6 {
            for j in 0..6 {
                t = t.max((model.tau().get(i, j) - w.tau.get(i, j)).abs());
            }
        }
    }
    verdict(
        e.max(c).max(b) <= 1e-3 && t <= 1e-3,
        format!("{worlds} worlds: max rel err E {e:.1e}, C {c:.1e}, beta {b:.1e}; max tau err {t:.1e}"),
    )
}

fn noisy_recovery() -> Verdict {
    let worlds = 50;
    let mut hits = 0;
    let mut total = 0;
    for seed in 0..worlds {
        let w = world(6, WorldStructure::Random, 2_000 + seed, NoiseModel::Multiplicative { sigma: 0.02 });
        let model = fitted(&w, &FIT_BUDGETS, 3);
        for (fit, truth) in model.params().iter().zip(&w.params) {
            total += 1;
            if (fit.beta() - truth.beta()).abs() <= 0.05 {
                hits += 1;
            }
        }
    }
    let share = hits as f64 / total as f64;
    verdict(
        share >= 0.9,
        format!("beta within 0.05 for {hits}/{total} = {:.1}% of (world, domain) pairs (need 90%)", 100.0 * share),
    )
}

fn grid_oracle() -> Verdict {
    let worlds = 20;
    let mut worst = 0.0f64;
    for seed in 0..worlds {
        let model = world(3, WorldStructure::Random, 3_000 + seed, NoiseModel::none()).as_model();
        let w = TargetWeights::uniform(3);
        let r = optimize_mixture(&model, 1e5, &w, &OptimizerConfig::default(), LawVariant::TransferAware).unwrap();
        let (grid, _) = grid_minimum(&model, 1e5, w.as_slice(), 0.05, 200);
        worst = worst.max((r.objective_value - grid).abs());
    }
    verdict(
        worst <= 1e-6,
        format!("{worlds} worlds: max |optimizer - grid| = {worst:.2e} (limit 1e-6)"),
    )
}

fn gradient_check() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4_000);
    let step = 1e-6;
    let mut worst = 0.0f64;
    for point in 0..100u64 {
        let model = world(6, WorldStructure::Random, 4_000 + point, NoiseModel::none()).as_model();
        let h = random_interior(&mut rng, 6, 0.01);
        let budget = 10f64.powf(rng.random_range(3.0..6.0));
        let target = rng.random_range(0..6);
        let mixture = MixtureWeights::unfloored(h.clone()).unwrap();
        let analytic = predict_gradient(&model, &mixture, budget, target).unwrap();
        for j in 0..6 {
            let (mut up, mut down) = (h.clone(), h.clone());
            up[j] += step;
            down[j] -= step;
            let fd = (oracle_loss(&model, &up, budget, target) - oracle_loss(&model, &down, budget, target)) / (2.0 * step);
            worst = worst.max((analytic[j] - fd).abs() / fd.abs());
        }
    }
    verdict(worst <= 1e-5, format!("100 points: max relative error {worst:.2e} (limit 1e-5)"))
}

fn extrapolation() -> Verdict {
    let fit_budgets = [1e4, 5e4, 1e5];
    let h = MixtureWeights::uniform(6);
    let clean = world(6, WorldStructure::Random, 5_000, NoiseModel::none());
    let model = fitted(&clean, &fit_budgets, 1);
    let held_out = sample_mixture_observations(&clean, &h, 2e5, 1).unwrap();
    let exact = extrapolate(&model, &held_out, &h, &fit_budgets).unwrap();
    let exact_r = exact.pearson_r.unwrap_or(f64::NAN);
    let noiseless_ok = exact.mean_relative_error <= 1e-6 && exact_r >= 1.0 - 1e-9;

    let worlds = 50;
    let (mut errors, mut rs) = (Vec::new(), Vec::new());
    for seed in 0..worlds {
        let noisy = world(6, WorldStructure::Random, 5_100 + seed, NoiseModel::Multiplicative { sigma: 0.02 });
        let model = fitted(&noisy, &fit_budgets, 3);
        let held_out = sample_mixture_observations(&noisy, &h, 2e5, 3).unwrap();
        let report = extrapolate(&model, &held_out, &h, &fit_budgets).unwrap();
        errors.push(report.mean_relative_error);
        rs.push(report.pearson_r.unwrap_or(f64::NAN));
    }
    let mean_error = errors.iter().sum::<f64>() / worlds as f64;
    let mean_r = rs.iter().sum::<f64>() / worlds as f64;
    let min_r = rs.iter().copied().fold(f64::INFINITY, f64::min);
    let max_error = errors.iter().copied().fold(0.0, f64::max);
    verdict(
        noiseless_ok && max_error <= 0.03 && min_r >= 0.95,
        format!(
            "noiseless: error {:.1e}, r = {exact_r:.12}; noisy, every one of {worlds} worlds: error mean {:.2}% max {:.2}% (limit 3%), r mean {mean_r:.4} min {min_r:.4} (limit 0.95)",
            exact.mean_relative_error,
            100.0 * mean_error,
            100.0 * max_error
        ),
    )
}

fn structural_allocation() -> Verdict {
    let model = reference_model();
    let r = optimize_mixture(
        &model,
        REFERENCE_BUDGET,
        &TargetWeights::uniform(6),
        &OptimizerConfig::default(),
        LawVariant::TransferAware,
    )
    .unwrap();
    let h = r.h_star.weights();
    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&a, &b| h[b].total_cmp(&h[a]));
    let largest = DOMAINS[order[0]];
    let second = DOMAINS[order[1]];
    let floored: Vec<&str> = r.active_floor_set.iter().map(|&j| DOMAINS[j]).collect();
    let expected_floor = ["ABD_MRI", "BRAIN_T1", "BRAIN_T2", "HEAD_CT"];
    let passed = largest == "HEAD_PET" && second == "ABD_CT" && floored == expected_floor;
    let shares: Vec<String> = (0..6).map(|j| format!("{}={:.3}", DOMAINS[j], h[j])).collect();
    verdict(
        passed,
        format!(
            "largest {largest}, second {second}, at floor {floored:?}; expected HEAD_PET, ABD_CT, {expected_floor:?}; h* = [{}]",
            shares.join(", ")
        ),
    )
}

fn strategy_ordering() -> Verdict {
    let worlds = 10;
    let config = OptimizerConfig {
        restarts: 20,
        ..Default::default()
    };
    let strategies = [Strategy::TransferAware, Strategy::TransferNaive, Strategy::Uniform];
    let mut violations = Vec::new();
    let mut smallest_gap = f64::INFINITY;
    for seed in 0..worlds {
        let w = world(6, WorldStructure::HubIsland, 6_000 + seed, NoiseModel::Multiplicative { sigma: 0.02 });
        let model = fitted(&w, &FIT_BUDGETS, 3);
        for &budget in &FIT_BUDGETS {
            let cmp = compare_strategies(&model, budget, &strategies, &TargetWeights::uniform(6), &config).unwrap();
            let aware = cmp.row(Strategy::TransferAware).unwrap().mean_loss;
            for other in [Strategy::TransferNaive, Strategy::Uniform] {
                let gap = cmp.row(other).unwrap().mean_loss - aware;
                smallest_gap = smallest_gap.min(gap);
                if gap <= 0.0 {
                    violations.push(format!("world {seed} T={budget} vs {}", other.label()));
                }
            }
        }
    }
    verdict(
        violations.is_empty(),
        format!(
            "{worlds} hub-island worlds x 4 budgets: smallest margin {smallest_gap:.2e}, violations {violations:?}"
        ),
    )
}

fn cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let cli = Cli::try_parse_from(std::iter::once("mixlaw").chain(args.iter().copied())).map_err(|e| e.to_string())?;
    run(&cli.command).result.map(|_| ()).map_err(|e| format!("{}: {e}", dir.display()))
}

fn pipeline(dir: &Path) -> Result<Vec<Vec<u8>>, String> {
    let p = |name: &str| dir.join(name).display().to_string();
    let (obs, catalog, model, alloc, decomp) = (p("obs.csv"), p("catalog.csv"), p("model.json"), p("alloc.json"), p("decomp.json"));
    cli(dir, &["simulate", "--seed", "17", "--out", &obs, "--catalog-out", &catalog])?;
    cli(dir, &["fit", "--catalog", &catalog, "--observations", &obs, "--out", &model])?;
    cli(dir, &["optimize", "--model", &model, "--budget", "10000,100000", "--seed", "3", "--out", &alloc])?;
    cli(dir, &["decompose", "--model", &model, "--allocation", &alloc, "--out", &decomp])?;
    [obs, catalog, model, alloc, decomp]
        .iter()
        .map(|f| fs::read(f).map_err(|e| e.to_string()))
        .collect()
}

fn cli_determinism() -> Verdict {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    match (pipeline(first.path()), pipeline(second.path())) {
        (Ok(a), Ok(b)) => {
            let same = a.iter().zip(&b).filter(|(x, y)| x == y).count();
            let bytes: usize = a.iter().map(Vec::len).sum();
            verdict(
                same == a.len() && a.len() == b.len(),
                format!("{same}/{} outputs byte-identical ({bytes} bytes per run)", a.len()),
            )
        }
        (Err(e), _) | (_, Err(e)) => verdict(false, format!("pipeline failed: {e}")),
    }
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "reference decomposition", limit: Duration::from_secs(1), check: reference_decomposition },
        Criterion { id: 2, name: "data-proportional heuristic", limit: Duration::from_secs(1), check: data_proportional },
        Criterion { id: 3, name: "budget/loss ratio correlation", limit: Duration::from_secs(1), check: ratio_correlation },
        Criterion { id: 4, name: "noiseless fit recovery", limit: Duration::from_secs(60), check: noiseless_recovery },
        Criterion { id: 5, name: "noisy fit recovery", limit: Duration::from_secs(120), check: noisy_recovery },
        Criterion { id: 6, name: "optimizer vs grid oracle", limit: Duration::from_secs(60), check: grid_oracle },
        Criterion { id: 7, name: "gradient vs finite differences", limit: Duration::from_secs(10), check: gradient_check },
        Criterion { id: 8, name: "extrapolation", limit: Duration::from_secs(120), check: extrapolation },
        Criterion { id: 9, name: "structural allocation", limit: Duration::from_secs(10), check: structural_allocation },
        Criterion { id: 10, name: "strategy ordering", limit: Duration::from_secs(120), check: strategy_ordering },
        Criterion { id: 11, name: "CLI determinism", limit: Duration::from_secs(60), check: cli_determinism },
    ];

    let mut failed = Vec::new();
    for c in &criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|payload| {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.limit;
        let passed = outcome.passed && in_time;
        let timing = if in_time {
            format!("{:.2}s", elapsed.as_secs_f64())
        } else {
            format!("{:.2}s, over the {}s limit", elapsed.as_secs_f64(), c.limit.as_secs())
        };
        println!(
            "criterion {:>2} [{}] {}: {} ({timing})",
            c.id,
            if passed { "PASS" } else { "FAIL" },
            c.name,
            outcome.detail
        );
        if !passed {
            failed.push(c.id);
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed.len(), criteria.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
